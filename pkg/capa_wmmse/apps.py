from django.apps import AppConfig


class CapaWmmseConfig(AppConfig):
    name = 'capa_wmmse'
    verbose_name = 'CAPA-MIMO WMMSE beamforming'
