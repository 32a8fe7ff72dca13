import dataclasses
from typing import Dict, Optional, Type

from .channel import PhysicalConstants
from .geometry import ApertureGeometry


class BaseStrategy:
    def __call__(self, field, obj, key: str, value):
        setattr(obj, key, value)


class DataclassStrategy(BaseStrategy):
    """
    Builds a dataclass instance from a nested block. `mapping` renames config
    keys to constructor arguments; keys missing from the block keep the
    dataclass defaults.
    """
    def __init__(self, cls: Type, mapping: Optional[Dict[str, str]] = None, property_name: Optional[str] = None):
        self._cls = cls
        self._mapping = mapping or {}
        self._property_name = property_name

    def build(self, value: dict):
        names = {item.name for item in dataclasses.fields(self._cls)}
        arguments = {}
        for key, item in value.items():
            name = self._mapping.get(key, key)
            if name in names and item is not None:
                arguments[name] = item
        return self._cls(**arguments)

    def __call__(self, field, obj, key: str, value):
        setattr(obj, self._property_name or key, self.build(value))


class ConstantsStrategy(DataclassStrategy):
    def __init__(self, property_name: Optional[str] = None):
        super().__init__(PhysicalConstants, {
            'f': 'frequency',
            'c': 'speed_of_light',
            'eta': 'impedance',
            'sigma2': 'noise_power',
            'P_T': 'transmit_power',
            'power_unit': 'power_unit',
        }, property_name)


class GeometryStrategy(DataclassStrategy):
    def __init__(self, property_name: Optional[str] = None):
        super().__init__(ApertureGeometry, {
            'L_x': 'length_x',
            'L_y': 'length_y',
            'r_o': 'offset',
            'alpha': 'alpha',
            'beta': 'beta',
            'phi': 'phi',
            'polarization': 'polarization',
        }, property_name)
