"""
Django settings for the vhalaudit project.

The analysis pipeline is an offline tool, but it rides on a regular Django
project: management commands are the CLI, DRF serializers validate every
external input, and recorded runs can be browsed through a small read-only API.

Analysis defaults live in the ``AUDITOR`` dict at the bottom; each one can be
overridden from the environment (a ``.env`` file next to manage.py is loaded
first).
"""

from pathlib import Path
import os

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')


def env_bool(name, default=False):
    return os.getenv(name, str(default)) == "True"


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv("SECRET_KEY", "dev-secret-only")

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = env_bool("DEBUG")

ALLOWED_HOSTS = [
    host.strip()
    for host in os.getenv("ALLOWED_HOSTS", "localhost,127.0.0.1").split(",")
    if host.strip()
]


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    'corsheaders',
    'rest_framework',
    'rest_framework.authtoken',
    'audit',
]

MIDDLEWARE = [
    'corsheaders.middleware.CorsMiddleware',
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]


ROOT_URLCONF = 'vhalaudit.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

REST_FRAMEWORK = {
    'DEFAULT_AUTHENTICATION_CLASSES': [
        'rest_framework.authentication.TokenAuthentication',
    ],
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
}


WSGI_APPLICATION = 'vhalaudit.wsgi.application'

# The run-history API is read by a separate front end.
CORS_ALLOWED_ORIGINS = [
    origin.strip()
    for origin in os.getenv("CORS_ALLOWED_ORIGINS", "").split(",")
    if origin.strip()
]

# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv("AUDITOR_DB", str(BASE_DIR / 'db.sqlite3')),
    }
}


# Password validation
# https://docs.djangoproject.com/en/5.2/ref/settings/#auth-password-validators

AUTH_PASSWORD_VALIDATORS = [
    {
        'NAME': 'django.contrib.auth.password_validation.UserAttributeSimilarityValidator',
    },
    {
        'NAME': 'django.contrib.auth.password_validation.MinimumLengthValidator',
    },
]


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


STATIC_URL = 'static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging
# Console only; `--quiet` and `--json-logs` rebuild this dict at run time
# through audit.logconfig.configure_logging().

LOG_LEVEL = os.getenv("AUDITOR_LOG_LEVEL", "INFO")

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
        'json': {
            '()': 'audit.logconfig.JsonFormatter',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'json' if env_bool("AUDITOR_JSON_LOGS") else 'verbose',
        },
    },
    'loggers': {
        'audit': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'vhalaudit': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Analysis defaults

DATA_DIR = BASE_DIR / 'audit' / 'data'

AUDITOR = {
    'THRESHOLD': float(os.getenv("AUDITOR_THRESHOLD", "0.2")),
    'WINDOW_SECONDS': float(os.getenv("AUDITOR_WINDOW", "300")),
    'BUCKET_SECONDS': float(os.getenv("AUDITOR_BUCKET", "10")),
    'TRACE_SPACING_MS': int(os.getenv("AUDITOR_TRACE_SPACING_MS", "1")),
    'SERIES_BIN_SECONDS': int(os.getenv("AUDITOR_SERIES_BIN", "60")),
    'CHUNK_SENTENCES': int(os.getenv("AUDITOR_CHUNK_SENTENCES", "20")),
    'SCAN_WORKERS': int(os.getenv("AUDITOR_SCAN_WORKERS", "4")),
    'SCAN_EXTENSIONS': tuple(
        os.getenv("AUDITOR_SCAN_EXTENSIONS", ".java,.smali,.xml,.txt").split(",")
    ),
    'EXTRACTOR': os.getenv("AUDITOR_EXTRACTOR", "rule"),
    'EXTRACTOR_URL': os.getenv("AUDITOR_EXTRACTOR_URL", ""),
    'EXTRACTOR_TOKEN': os.getenv("AUDITOR_EXTRACTOR_TOKEN", ""),
    'EXTRACTOR_TIMEOUT': float(os.getenv("AUDITOR_EXTRACTOR_TIMEOUT", "30")),
    'EXTRACTOR_RETRIES': int(os.getenv("AUDITOR_EXTRACTOR_RETRIES", "2")),
    'EXTRACTOR_MAX_IN_FLIGHT': int(os.getenv("AUDITOR_EXTRACTOR_MAX_IN_FLIGHT", "4")),
    'EXTRACTOR_FALLBACK': env_bool("AUDITOR_EXTRACTOR_FALLBACK", True),
    'RECORD_RUNS': env_bool("AUDITOR_RECORD_RUNS"),
    'LEXICON_FILE': DATA_DIR / 'lexicon.json',
    'TAXONOMY_FILE': DATA_DIR / 'taxonomy.json',
    'POLICY_VOCABULARY_FILE': DATA_DIR / 'policy_vocabulary.json',
    'DETECTORS_FILE': DATA_DIR / 'detectors.json',
    'DESTINATIONS_FILE': DATA_DIR / 'destinations.json',
}
