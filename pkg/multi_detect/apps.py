from django.apps import AppConfig


class MultiDetectConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'multi_detect'
    verbose_name = 'Multiple change point detection'
