from django.apps import AppConfig


class AccountingConfig(AppConfig):
    name = 'accounting'
    verbose_name = 'Operation & Parameter Accounting'
