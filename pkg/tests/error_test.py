import unittest

from formant_da.cli import EXIT_CODES
from formant_da.error import *


class TestError(unittest.TestCase):
    def test_str(self):
        self.assertEqual(str(UsageError("bad flag")), "UsageError: bad flag")
        self.assertEqual(str(DataError("missing file")), "DataError: missing file")
        self.assertEqual(str(NumericError("singular")), "NumericError: singular")

    def test_hierarchy(self):
        for cls, etype in ((UsageError, "Usage"), (DataError, "Data"), (NumericError, "Numeric")):
            e = cls("x")
            self.assertIsInstance(e, FormantError)
            self.assertEqual(e.error_type, etype)
            self.assertEqual(e.msg, "x")

    def test_exit_codes(self):
        self.assertEqual(EXIT_CODES[UsageError("x").error_type], 2)
        self.assertEqual(EXIT_CODES[DataError("x").error_type], 3)
        self.assertEqual(EXIT_CODES[NumericError("x").error_type], 4)

    def test_unknown_type(self):
        with self.assertRaises(TypeError):
            str(FormantError("Other", "x"))  # type: ignore[arg-type]


if __name__ == '__main__':
    unittest.main()
