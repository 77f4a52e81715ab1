"""
Celery configuration for lsvar.
"""
import os
from celery import Celery

# Set the default Django settings module for the 'celery' program.
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'lsvar.settings')

app = Celery('lsvar')

# Settings are read from CELERY_-prefixed names in django.conf.settings.
app.config_from_object('django.conf:settings', namespace='CELERY')

# Picks up evaluation.tasks.
app.autodiscover_tasks()
