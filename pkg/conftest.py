import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'lsvar.settings')
django.setup()
