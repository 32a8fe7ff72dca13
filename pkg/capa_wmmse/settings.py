from django.conf import settings

DEFAULTS = {
    'DEFAULT_POPULATION_STRATEGY': 'capa_wmmse.population_strategies.BaseStrategy',
    'PARSERS': {
        '.json': 'json.loads',
        '.msgpack': 'msgpack.unpackb',
        '.mpk': 'msgpack.unpackb',
        '.toml': 'toml.loads',
    },
    'SAMPLE_BUDGET': 4096,
    'CONDITION_LIMIT': 1e14,
    'CONFIG_ENV': 'CAPA_WMMSE_CONFIG',
}


class Settings:
    def __getattr__(self, item):
        if item not in DEFAULTS:
            raise AttributeError(f"'{self.__class__.__name__}' object has no attribute '{item}'")

        django_setting = f"CAPA_WMMSE_{item}"
        default = DEFAULTS[item]

        if settings.configured and hasattr(settings, django_setting):
            customized_value = getattr(settings, django_setting)
            if isinstance(default, dict):
                value = {**default, **customized_value}
            else:
                value = customized_value
        elif isinstance(default, dict):
            value = dict(default)
        else:
            value = default

        setattr(self, item, value)
        return value
