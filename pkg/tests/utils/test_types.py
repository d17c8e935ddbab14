import unittest

from app.utils.types import ArtifactKind, NoiseKind, OrientationSource, PresetName, parse_enum


class TestTypes(unittest.TestCase):
    def test_parse_enum_from_value(self):
        self.assertIs(parse_enum(PresetName, "sawtooth"), PresetName.SAWTOOTH)
        self.assertIs(parse_enum(NoiseKind, " Laplace "), NoiseKind.LAPLACE)

    def test_parse_enum_passes_members_through(self):
        self.assertIs(parse_enum(OrientationSource, OrientationSource.PROXY), OrientationSource.PROXY)

    def test_parse_enum_rejects_unknown(self):
        with self.assertRaises(ValueError) as ctx:
            parse_enum(ArtifactKind, "spreadsheet")
        self.assertIn("Expected one of", str(ctx.exception))

    def test_enum_values_are_strings(self):
        self.assertEqual(PresetName.SINGLE, "single")
        self.assertEqual(len(PresetName), 7)


if __name__ == "__main__":
    unittest.main()
