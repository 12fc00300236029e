from django.apps import AppConfig


class CotrainConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'cotrain'
    verbose_name = 'Co-training engine'
