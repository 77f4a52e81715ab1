"""
Django settings for the lsvar project.
"""

import os
from pathlib import Path

import environ
from dotenv import load_dotenv

load_dotenv()

env = environ.Env(
    DEBUG=(bool, False),
    LSVAR_THREADS=(int, 1),
    LSVAR_MAX_ITERATIONS=(int, 500),
    LSVAR_REL_TOLERANCE=(float, 1e-6),
    LSVAR_C0=(float, 0.01),
    LSVAR_C0_PRIME=(float, 0.01),
    LSVAR_C1=(float, 0.01),
    LSVAR_C1_PRIME=(float, 0.01),
    LSVAR_ALPHA_C=(float, 0.5),
    LSVAR_RANK_THRESHOLD=(float, 0.01),
    LSVAR_SUPPORT_THRESHOLD=(float, 1e-3),
    LSVAR_BURN_IN=(int, 200),
    LSVAR_REPLICATES=(int, 20),
    LSVAR_BASE_SEED=(int, 0),
    CELERY_TASK_ALWAYS_EAGER=(bool, True),
)

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'lsvar-local-only')

DEBUG = env('DEBUG')

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',

    # Local apps
    'var_model',
    'estimation',
    'single_detect',
    'multi_detect',
    'surrogate',
    'evaluation',
    'cli',
]

# Nothing is persisted; the test runner still expects a configured database.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('DB_NAME', str(BASE_DIR / 'db.sqlite3')),
    }
}

TIME_ZONE = 'UTC'

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Worker count for per-tau, per-window, per-grid-cell and per-IC evaluations
LSVAR_THREADS = env('LSVAR_THREADS')

# Solver defaults
LSVAR_MAX_ITERATIONS = env('LSVAR_MAX_ITERATIONS')
LSVAR_REL_TOLERANCE = env('LSVAR_REL_TOLERANCE')

# Tuning constants (search phase c0/c0', segment phase c1/c1')
LSVAR_C0 = env('LSVAR_C0')
LSVAR_C0_PRIME = env('LSVAR_C0_PRIME')
LSVAR_C1 = env('LSVAR_C1')
LSVAR_C1_PRIME = env('LSVAR_C1_PRIME')
LSVAR_ALPHA_C = env('LSVAR_ALPHA_C')

# Reporting thresholds
LSVAR_RANK_THRESHOLD = env('LSVAR_RANK_THRESHOLD')
LSVAR_SUPPORT_THRESHOLD = env('LSVAR_SUPPORT_THRESHOLD')

# Simulation and benchmarking
LSVAR_BURN_IN = env('LSVAR_BURN_IN')
LSVAR_REPLICATES = env('LSVAR_REPLICATES')
LSVAR_BASE_SEED = env('LSVAR_BASE_SEED')

# Celery Configuration
CELERY_BROKER_URL = os.getenv('CELERY_BROKER_URL', 'redis://localhost:6379/0')
CELERY_RESULT_BACKEND = os.getenv('CELERY_RESULT_BACKEND', 'redis://localhost:6379/0')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE
CELERY_TASK_ALWAYS_EAGER = env('CELERY_TASK_ALWAYS_EAGER')
CELERY_TASK_EAGER_PROPAGATES = True

# Logging
LSVAR_LOG_LEVEL = os.getenv('LSVAR_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': LSVAR_LOG_LEVEL,
            'propagate': False,
        }
        for app in (
            'lsvar', 'var_model', 'estimation', 'single_detect', 'multi_detect',
            'surrogate', 'evaluation', 'cli', 'celery',
        )
    },
}
