from django.apps import AppConfig
import logging

logger = logging.getLogger(__name__)


class BarycentersConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'barycenters'
    verbose_name = 'Wasserstein barycenters'

    def ready(self):
        from django.conf import settings

        logger.debug(f"BarycentersConfig ready() called for app: {self.name}.")
        logger.debug(f"Numerical defaults: {settings.BARYCENTERS}")
