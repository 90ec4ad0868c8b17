import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only used by Django internals; nothing here is served over HTTP.
SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'django-insecure-barycenters-local-key')

DEBUG = os.environ.get('DJANGO_DEBUG', '0') == '1'

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'rest_framework',           # Serializers for measure, spec and record files
    'barycenters',              # Wasserstein barycenter solvers and commands
]

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get('BARYCENTER_DB_PATH', BASE_DIR / 'db.sqlite3'),
    }
}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


def _env_float(name, default):
    value = os.environ.get(name)
    return float(value) if value not in (None, '') else default


def _env_int(name, default):
    value = os.environ.get(name)
    return int(value) if value not in (None, '') else default


# Numerical defaults. Library calls take explicit keyword arguments and fall
# back to these when the argument is None.
BARYCENTERS = {
    'GRID_SIZE': _env_int('BARYCENTER_GRID_SIZE', 1000),
    'ORACLE_GRID_SIZE': _env_int('BARYCENTER_ORACLE_GRID_SIZE', 10000),
    'SPD_FLOOR': _env_float('BARYCENTER_SPD_FLOOR', 1e-10),
    'FIXED_POINT_TOL': _env_float('BARYCENTER_FIXED_POINT_TOL', 1e-10),
    'FIXED_POINT_MAX_ITER': _env_int('BARYCENTER_FIXED_POINT_MAX_ITER', 500),
    'PASS_STANDARD_ERRORS': _env_float('BARYCENTER_PASS_STANDARD_ERRORS', 3.0),
    'WEIGHT_TOLERANCE': _env_float('BARYCENTER_WEIGHT_TOLERANCE', 1e-12),
    'SNAPSHOT_STRIDE': _env_int('BARYCENTER_SNAPSHOT_STRIDE', 100),
    'W2_CROSS_CHECK_TOLERANCE': _env_float('BARYCENTER_W2_CROSS_CHECK_TOLERANCE', 1e-8),
    'OUTPUT_DIR': os.environ.get('BARYCENTER_OUTPUT_DIR', 'output'),
}


# LOGGING configuration for console output
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'barycenters': {
            'handlers': ['console'],
            'level': os.environ.get('BARYCENTER_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    }
}
