"""
WSGI config for the vhalaudit project (serves the run-history API).

It exposes the WSGI callable as a module-level variable named ``application``.
Run it with ``gunicorn vhalaudit.wsgi``.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'vhalaudit.settings')

application = get_wsgi_application()
