"""
Django settings for the ec2t project.
Entropy-constrained trained ternarization: quantizer, trainer, storage codec and accounting.
"""

import os
from pathlib import Path

from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='ec2t-local-only-not-a-secret')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'tensors.apps.TensorsConfig',
    'scaling.apps.ScalingConfig',
    'quantizer.apps.QuantizerConfig',
    'trainer.apps.TrainerConfig',
    'storage.apps.StorageConfig',
    'accounting.apps.AccountingConfig',
    'cli.apps.CliConfig',
]

# No database: every command is a pure computation over files and arguments.
DATABASES = {}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

USE_TZ = True


# ============================================================================
# EC2T CONFIGURATION
# ============================================================================
# Every value can be overridden from the environment or a .env file.
# Library functions read these when the caller does not pass a value.

# Internal parallelism (per-layer quantization during reassignment)
EC2T_THREADS = config('EC2T_THREADS', default=os.cpu_count() or 1, cast=int)

EC2T_DEFAULT_SEED = config('EC2T_DEFAULT_SEED', default=20201027, cast=int)

# Quantizer
EC2T_FIXED_POINT_ITERATIONS = config('EC2T_FIXED_POINT_ITERATIONS', default=10, cast=int)
EC2T_LAMBDA_MAX_RTOL = config('EC2T_LAMBDA_MAX_RTOL', default=1e-3, cast=float)
EC2T_LAMBDA_MAX_CAP = config('EC2T_LAMBDA_MAX_CAP', default=2.0 ** 20, cast=float)

# Compound scaling
EC2T_SCALING_TOLERANCE = config('EC2T_SCALING_TOLERANCE', default=0.01, cast=float)
EC2T_SCALING_GRID_STEP = config('EC2T_SCALING_GRID_STEP', default=0.01, cast=float)

# Trainer defaults (reference two-moons MLP)
EC2T_TRAIN_EPOCHS = config('EC2T_TRAIN_EPOCHS', default=200, cast=int)
EC2T_TRAIN_BATCH_SIZE = config('EC2T_TRAIN_BATCH_SIZE', default=32, cast=int)
EC2T_TRAIN_LEARNING_RATE = config('EC2T_TRAIN_LEARNING_RATE', default=0.1, cast=float)
EC2T_TRAIN_CENTROID_LEARNING_RATE = config('EC2T_TRAIN_CENTROID_LEARNING_RATE', default=0.01, cast=float)
EC2T_TRAIN_SAMPLES = config('EC2T_TRAIN_SAMPLES', default=512, cast=int)
EC2T_TRAIN_NOISE = config('EC2T_TRAIN_NOISE', default=0.1, cast=float)
EC2T_SWEEP_GAMMAS = config('EC2T_SWEEP_GAMMAS', default='0,0.1,0.2,0.3,0.4')


# Logging
# Console logging goes to stderr; stdout carries command results only.
EC2T_LOG_LEVEL = config('EC2T_LOG_LEVEL', default='WARNING')
EC2T_LOG_FILE = config('EC2T_LOG_FILE', default='')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': EC2T_LOG_LEVEL,
            'propagate': False,
        }
        for app in ('tensors', 'scaling', 'quantizer', 'trainer', 'storage', 'accounting', 'cli')
    },
}

if EC2T_LOG_FILE:
    LOGGING['handlers']['file'] = {
        'level': 'DEBUG',
        'class': 'logging.FileHandler',
        'filename': EC2T_LOG_FILE,
        'formatter': 'simple',
    }
    for logger_config in LOGGING['loggers'].values():
        logger_config['handlers'].append('file')
