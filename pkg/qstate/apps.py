from django.apps import AppConfig


class QstateConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'qstate'
