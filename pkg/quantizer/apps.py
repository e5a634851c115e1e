from django.apps import AppConfig


class QuantizerConfig(AppConfig):
    name = 'quantizer'
    verbose_name = 'Entropy-Constrained Ternary Quantizer'
