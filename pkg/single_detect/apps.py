from django.apps import AppConfig


class SingleDetectConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'single_detect'
    verbose_name = 'Single change point detection'
