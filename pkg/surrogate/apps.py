from django.apps import AppConfig


class SurrogateConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'surrogate'
    verbose_name = 'Weakly sparse surrogate detection'
