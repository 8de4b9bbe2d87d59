"""
Django settings for core project.

Generated by "django-admin startproject" using Django 5.2.7.

The project hosts no web surface: Django provides configuration, app
discovery, management commands and the test runner for the passage
synthesis and simulation apps.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import math
from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / "subdir".
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config("SECRET_KEY", default="temp-secret-key")

DEBUG = config("DEBUG", default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
    # Third party apps
    "rest_framework",
    # Project apps
    "qstate",
    "passage",
    "dynamics",
    "optimize",
    "bench",
    "cli",
]

MIDDLEWARE = []

ROOT_URLCONF = "core.urls"


# Database
# Nothing is persisted; the entry only satisfies Django's checks.

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": config("DB_NAME", default=str(BASE_DIR / "db.sqlite3")),
    }
}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# REST Framework configuration (serializers only)
REST_FRAMEWORK = {
    "UNAUTHENTICATED_USER": None,
    "COERCE_DECIMAL_TO_STRING": False,
}


# Logging
# All diagnostics go to stderr so data files written to stdout stay clean.

LOG_LEVEL = config("LOG_LEVEL", default="INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "stderr": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "plain",
        },
    },
    "root": {
        "handlers": ["stderr"],
        "level": LOG_LEVEL,
    },
    "loggers": {
        "matplotlib": {"level": "WARNING"},
    },
}


# Passage toolkit configuration

# Upper bound of the sweep worker pool (1 = evaluate cells in-process)
PASSAGE_THREADS = config("PASSAGE_THREADS", default=1, cast=int)

# Default sample spacing of synthesized waveforms (ns)
PASSAGE_DT_NS = config("PASSAGE_DT_NS", default=0.02, cast=float)

PASSAGE_OUTPUT_DIR = config("PASSAGE_OUTPUT_DIR", default="out")

MHZ = 2 * math.pi * 1e-3  # rad/ns per MHz

PASSAGE = {
    # Device of the reference experiment (GHz, ns)
    "SYSTEM": {
        "f10": 5.208,
        "f21": 4.958,
        "t1_10": 4820.0,
        "t2_10": 5060.0,
        "t1_21": 5960.0,
        "t2_21": 2550.0,
        "dims": 4,
        "include_leakage": True,
        "decoherence": True,
    },
    # Per-protocol defaults; amplitudes in MHz (Omega/2pi), times in ns
    "PROTOCOLS": {
        "stirap": {"omega0_mhz": 20.0, "duration_ns": 150.0},
        "rr": {"omega0_mhz": 20.0, "duration_ns": 40.0},
        "stirup": {"omega0_mhz": 20.0, "duration_ns": 50.0},
        "stirup-op": {"omega0_mhz": 18.0, "duration_ns": 44.0, "shape_a": 0.0, "shape_b": 6.0},
        "stirup-drag": {"omega0_mhz": 20.0, "duration_ns": 50.0, "lambda_p": 1.0, "lambda_s": 1.0},
        "stirap-cd": {"omega0_mhz": 20.0, "duration_ns": 150.0},
    },
    "SWEEP": {
        "eta_min": -0.3,
        "eta_max": 0.3,
        "eta_points": 61,
        "detuning_max_mhz": 20.0,
        "detuning_points": [41, 41],
    },
    "OPTIMIZER": {
        "budget": 120,
        "starts": 3,
        "bounds_a": (0.0, 5.0),
        "bounds_b": (2.0, 12.0),
        "bounds_lambda": (-2.0, 2.0),
    },
    # Calibration anchors of the resolution step and the STIRAP timing box (fractions of T)
    "RESOLUTION": {
        "target_efficiency": 0.96,
        "anchors_ns": {"stirup-op": 34.0, "stirap": 150.0, "stirap-cd": 150.0},
        "bounds_sigma": (0.1, 0.3),
        "bounds_delay": (0.02, 0.25),
    },
}
