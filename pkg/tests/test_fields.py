"""
Based on Django's field tests:
https://github.com/django/django/tree/stable/3.0.x/tests/forms_tests/field_tests
"""
import logging
from enum import Enum

from django.core.validators import EMPTY_VALUES
from django.forms import ValidationError, fields
from django.test import SimpleTestCase

from capa_wmmse.exceptions import CapaException
from capa_wmmse.fields import (
    BooleanField, EnumField, FieldList, FormField, PositiveFloatField, StreamCountField, VectorField,
)
from capa_wmmse.forms import Form


def log_input(val):
    """
    Logs info about attempted form field input values.

    Mainly for tests that can raise ValidationError, because ValidationError
    sometimes doesn't show the attempted value and a raised exception doesn't
    return a value for assert (which does show the attempted value).
    """
    logging.info('attempted input: "%s", type: "%s"', val, type(val))


class BooleanFieldTests(SimpleTestCase):
    FALSEY_VALUES = [False, 0, '0', 'False', 'false']
    TRUTHY_VALUES = [1, '1', True, 'true', 'True']

    def test_booleanfield_required(self):
        bool_field = BooleanField()

        # TEST: required=True - falsy values return False
        for falsey_val in self.FALSEY_VALUES:
            log_input(falsey_val)
            self.assertFalse(bool_field.clean(falsey_val))

        # TEST: required=True - empty values throw error
        expected_error = "'This field is required.'"
        for empty_val in list(EMPTY_VALUES):  # (None, '', [], (), {})
            with self.assertRaisesMessage(ValidationError, expected_error):
                log_input(empty_val)
                bool_field.clean(empty_val)

        # TEST: truthy values return True
        for truthy_val in self.TRUTHY_VALUES:
            log_input(truthy_val)
            self.assertTrue(bool_field.clean(truthy_val))

    def test_booleanfield_required_false(self):
        bool_field = BooleanField(required=False)

        # TEST: required=False - empty values return None
        for empty_val in list(EMPTY_VALUES):
            log_input(empty_val)
            self.assertIsNone(bool_field.clean(empty_val))

        # TEST: unknown strings are rejected
        with self.assertRaisesMessage(ValidationError, 'Expected a boolean value.'):
            bool_field.clean('yes please')


class FieldListTests(SimpleTestCase):
    def test_fieldlist_init(self):
        FieldList(field=fields.IntegerField())

        # TEST: initialize FieldList with non-Field
        with self.assertRaises(CapaException):
            FieldList(field=int)

    def test_fieldlist_clean(self):
        field = FieldList(field=PositiveFloatField(), min_length=1, max_length=3)

        self.assertEqual(field.clean([1, '2.5']), [1.0, 2.5])
        self.assertEqual(field.clean((4.0,)), [4.0])

        # TEST: length limits
        with self.assertRaisesMessage(ValidationError, 'at least 1'):
            field.clean([])
        with self.assertRaisesMessage(ValidationError, 'at most 3'):
            field.clean([1, 2, 3, 4])

        # TEST: non-list input
        with self.assertRaisesMessage(ValidationError, 'This field needs to be a list!'):
            field.clean('1, 2')

    def test_fieldlist_item_errors(self):
        field = FieldList(field=PositiveFloatField())
        with self.assertRaises(ValidationError) as context:
            field.clean([1.0, -2.0, 'x'])

        paths = [error.path for error in context.exception.error_list]
        self.assertEqual(paths, [(1,), (2,)])

    def test_fieldlist_required(self):
        with self.assertRaisesMessage(ValidationError, 'This field is required.'):
            FieldList(field=fields.IntegerField()).clean(None)
        self.assertEqual(FieldList(field=fields.IntegerField(), required=False).clean(None), [])


class FormFieldTests(SimpleTestCase):
    class PointForm(Form):
        x = fields.FloatField()
        y = fields.FloatField(required=False)

    def test_valid(self):
        field = FormField(self.PointForm)
        self.assertEqual(field.clean({'x': 1, 'y': '2'}), {'x': 1.0, 'y': 2.0})

    def test_invalid(self):
        field = FormField(self.PointForm)
        with self.assertRaisesMessage(ValidationError, 'This field needs to be an object!'):
            field.clean([1, 2])

        with self.assertRaises(ValidationError) as context:
            field.clean({'y': 1.0})
        self.assertEqual(context.exception.error_list[0].path, ('x',))

    def test_missing_block(self):
        field = FormField(self.PointForm, required=False)
        with self.assertRaises(ValidationError):
            # x is required inside the block
            field.clean(None)


class EnumFieldTests(SimpleTestCase):
    class Colour(Enum):
        RED = 'red'
        BLUE = 'blue'

    def test_clean(self):
        field = EnumField(self.Colour)
        self.assertEqual(field.clean('red'), self.Colour.RED)

        with self.assertRaisesMessage(ValidationError, 'expected one of: red, blue'):
            field.clean('green')

        self.assertIsNone(EnumField(self.Colour, required=False).clean(None))

    def test_not_enum(self):
        with self.assertRaises(CapaException):
            EnumField(str)


class PositiveFloatFieldTests(SimpleTestCase):
    def test_clean(self):
        field = PositiveFloatField()
        self.assertEqual(field.clean('0.5'), 0.5)
        self.assertEqual(field.clean(3), 3.0)

        for value in (0, -1.0, '-2'):
            log_input(value)
            with self.assertRaisesMessage(ValidationError, 'greater than 0'):
                field.clean(value)

        for value in (True, 'abc', float('inf')):
            log_input(value)
            with self.assertRaises(ValidationError):
                field.clean(value)


class VectorFieldTests(SimpleTestCase):
    def test_clean(self):
        field = VectorField()
        self.assertEqual(field.clean([0, 1, 2.5]), (0.0, 1.0, 2.5))

        for value in ([0, 1], [0, 1, 'a'], [0, True, 1], [0, float('nan'), 1], 'abc'):
            log_input(value)
            with self.assertRaisesMessage(ValidationError, 'Expected a list of 3 finite numbers.'):
                field.clean(value)

        self.assertEqual(VectorField(size=2).clean((1, 2)), (1.0, 2.0))
        self.assertIsNone(VectorField(required=False).clean(None))


class StreamCountFieldTests(SimpleTestCase):
    def test_clean(self):
        field = StreamCountField(required=False)
        self.assertEqual(field.clean(6), 6)
        self.assertEqual(field.clean('6'), 6)
        self.assertEqual(field.clean('auto-dof'), 'auto-dof')
        self.assertEqual(field.clean('auto-fourier'), 'auto-fourier')
        self.assertIsNone(field.clean(None))

        for value in (0, -3, 2.5, True, 'auto', 'six'):
            log_input(value)
            with self.assertRaises(ValidationError):
                field.clean(value)
