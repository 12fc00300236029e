from django.apps import AppConfig


class QagentConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'qagent'
    verbose_name = 'Q-learning agent'
