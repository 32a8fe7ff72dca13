import math
import typing
from enum import Enum

from django.core.exceptions import ValidationError
from django.forms import Field, FloatField
from django.utils.translation import gettext_lazy as _

from .exceptions import CapaException, DetailValidationError

AUTO_STREAMS = ('auto-dof', 'auto-fourier')


class BooleanField(Field):
    default_error_messages = {
        'invalid': _('Expected a boolean value.'),
    }

    def to_python(self, value):
        if value in (True, 'True', 'true', '1', 1):
            return True
        elif value in (False, 'False', 'false', '0', 0):
            return False
        elif value in self.empty_values:
            return None
        raise ValidationError(self.error_messages['invalid'], code='invalid')

    def validate(self, value):
        if value is None and self.required:
            raise ValidationError(self.error_messages['required'], code='required')


class FieldList(Field):
    default_error_messages = {
        'max_length': _('Ensure this list has at most %(max)d values (it has %(length)d).'),
        'min_length': _('Ensure this list has at least %(min)d values (it has %(length)d).'),
        'not_field': _('Invalid Field type passed into FieldList!'),
        'not_list': _('This field needs to be a list!'),
    }

    def __init__(self, field, min_length=None, max_length=None, **kwargs):
        super().__init__(**kwargs)

        if not isinstance(field, Field):
            raise CapaException(self.error_messages['not_field'])

        self._min_length = min_length
        self._max_length = max_length
        self._field = field

    def to_python(self, value) -> typing.List:
        if value is None:
            return []

        if not isinstance(value, (list, tuple)):
            raise ValidationError(self.error_messages['not_list'], code='not_list')

        if self._min_length is not None and len(value) < self._min_length:
            params = {'min': self._min_length, 'length': len(value)}
            raise ValidationError(self.error_messages['min_length'], code='min_length', params=params)

        if self._max_length is not None and len(value) > self._max_length:
            params = {'max': self._max_length, 'length': len(value)}
            raise ValidationError(self.error_messages['max_length'], code='max_length', params=params)

        result = []
        errors = []

        for position, item in enumerate(value):
            try:
                result.append(self._field.clean(item))
            except ValidationError as e:
                errors.append(DetailValidationError(e, (position,)))

        if errors:
            raise ValidationError(errors)

        return result

    def validate(self, value):
        if not value and self.required:
            raise ValidationError(self.error_messages['required'], code='required')


class FormField(Field):
    """A nested block validated by its own form."""
    def __init__(self, form: typing.Type, **kwargs):
        self._form = form

        super().__init__(**kwargs)

    @property
    def form(self):
        return self._form

    def to_python(self, value) -> typing.Dict:
        if value is None:
            value = {}

        if not isinstance(value, dict):
            raise ValidationError(_('This field needs to be an object!'), code='not_dict')

        form = self._form(value)
        if form.is_valid():
            return form.cleaned_data
        else:
            raise ValidationError(form.errors)


class EnumField(Field):
    default_error_messages = {
        'not_enum': _('Invalid Enum type passed into EnumField!'),
        'invalid': _('Invalid value "%(value)s", expected one of: %(choices)s'),
    }

    def __init__(self, enum: typing.Type, **kwargs):
        super().__init__(**kwargs)

        if not (isinstance(enum, type) and issubclass(enum, Enum)):
            raise CapaException(self.error_messages['not_enum'])

        self.enum = enum

    def to_python(self, value) -> typing.Optional[Enum]:
        if value is not None:
            try:
                return self.enum(value)
            except ValueError:
                params = {'value': value, 'choices': ', '.join(str(item.value) for item in self.enum)}
                raise ValidationError(self.error_messages['invalid'], code='invalid', params=params)
        return None


class PositiveFloatField(FloatField):
    """Finite float strictly greater than zero; booleans are rejected."""
    default_error_messages = {
        'not_positive': _('Ensure this value is greater than 0 (it is %(value)s).'),
    }

    def to_python(self, value):
        if isinstance(value, bool):
            raise ValidationError(self.error_messages['invalid'], code='invalid')
        return super().to_python(value)

    def validate(self, value):
        super().validate(value)
        if value is not None and not value > 0:
            raise ValidationError(self.error_messages['not_positive'], code='not_positive', params={'value': value})


class VectorField(Field):
    default_error_messages = {
        'invalid': _('Expected a list of %(size)d finite numbers.'),
    }

    def __init__(self, size: int = 3, **kwargs):
        self._size = size
        super().__init__(**kwargs)

    def to_python(self, value) -> typing.Optional[typing.Tuple[float, ...]]:
        if value is None:
            return None

        params = {'size': self._size}
        if not isinstance(value, (list, tuple)) or len(value) != self._size:
            raise ValidationError(self.error_messages['invalid'], code='invalid', params=params)
        if any(isinstance(item, bool) or not isinstance(item, (int, float)) for item in value):
            raise ValidationError(self.error_messages['invalid'], code='invalid', params=params)

        result = tuple(float(item) for item in value)
        if not all(math.isfinite(item) for item in result):
            raise ValidationError(self.error_messages['invalid'], code='invalid', params=params)
        return result


class StreamCountField(Field):
    """Positive stream count, or one of the automatic rules ("auto-dof", "auto-fourier")."""
    default_error_messages = {
        'invalid': _('Expected a positive integer, "auto-dof" or "auto-fourier" (got %(value)s).'),
    }

    def to_python(self, value) -> typing.Union[int, str, None]:
        if value in self.empty_values:
            return None
        if value in AUTO_STREAMS:
            return value
        if isinstance(value, bool):
            raise ValidationError(self.error_messages['invalid'], code='invalid', params={'value': value})

        try:
            number = int(value)
        except (TypeError, ValueError):
            raise ValidationError(self.error_messages['invalid'], code='invalid', params={'value': value})

        if (number != value and str(number) != str(value)) or number < 1:
            raise ValidationError(self.error_messages['invalid'], code='invalid', params={'value': value})
        return number
