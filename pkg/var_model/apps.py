from django.apps import AppConfig


class VarModelConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'var_model'
    verbose_name = 'Piecewise VAR models'
