#  test_config.py
#
#  Copyright 2024 The mediogrid authors
#
#  MIT License
#
#  Permission is hereby granted, free of charge, to any person obtaining a copy
#  of this software and associated documentation files (the "Software"), to deal
#  in the Software without restriction, including without limitation the rights
#  to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
#  copies of the Software, and to permit persons to whom the Software is
#  furnished to do so, subject to the following conditions:
#
#  The above copyright notice and this permission notice shall be included in all
#  copies or substantial portions of the Software.
#
#  THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
#  IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
#  FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
#  AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
#  LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
#  OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
#  SOFTWARE.
#
#

import mediogrid
from mediogrid.config import parse_document
from mediogrid.errors import ConfigError
import unittest
import os

# INFO: for use in tests, cleaner to have two var references
example_seed_one = 7
example_seed_two = 1234


class ConfigTests(unittest.TestCase):

    def test_config_class_is_returned(self):
        """Assert get_config hands back the shared Config class"""
        self.assertIs(mediogrid.get_config(), mediogrid.config)

    def test_modify_config(self):
        mediogrid.config.reset()
        mediogrid.config.set_seed(example_seed_one).set_loss_probability(0.25).set_metric_period(30)
        self.assertEqual(mediogrid.config.MEDIOGRID_SEED, example_seed_one)
        self.assertEqual(mediogrid.config.MEDIOGRID_LOSS_PROBABILITY, 0.25)
        self.assertEqual(mediogrid.config.MEDIOGRID_METRIC_PERIOD, 30.0)
        mediogrid.config.reset()

    def test_reset_restores_import_values(self):
        mediogrid.config.reset()
        original = mediogrid.config.MEDIOGRID_SEED
        mediogrid.config.set_seed(original + 1)
        mediogrid.config.reset()
        self.assertEqual(mediogrid.config.MEDIOGRID_SEED, original)

    def test_invalid_setter_values(self):
        mediogrid.config.reset()
        with self.assertRaises(AssertionError):
            mediogrid.config.set_loss_probability(1.5)
        with self.assertRaises(AssertionError):
            mediogrid.config.set_metric_period(0)
        with self.assertRaises(AssertionError):
            mediogrid.config.set_seed("42")

    def test_config_prints_as_yaml(self):
        mediogrid.config.reset()
        text = str(mediogrid.config)
        self.assertIn("MEDIOGRID_SEED:", text)
        self.assertIn("MONGO_URI:", text)

    def test_file_settings_with_dotenv(self):
        mediogrid.config.reset()

        import tempfile
        tempdir = tempfile.mkdtemp()
        env_file = os.path.join(tempdir, ".env")

        sample_dotenv_one = """
MEDIOGRID_SEED={}
""".format(example_seed_one)
        with open(env_file, "w") as _file:
            _file.write(sample_dotenv_one)
        mediogrid.config.reload_from_file(env_path=env_file, override=True)
        self.assertEqual(mediogrid.config.MEDIOGRID_SEED, example_seed_one)
        os.environ.pop("MEDIOGRID_SEED", None)
        mediogrid.config.reset()

    def test_stream_settings_with_dotenv(self):
        mediogrid.config.reset()

        import io
        sample_dotenv_two = """
MEDIOGRID_SEED={}
MEDIOGRID_DEFAULT_VO=meteo
""".format(example_seed_two)
        stream = io.StringIO(sample_dotenv_two)
        mediogrid.config.reload_from_stream(stream, override=True)
        self.assertEqual(mediogrid.config.MEDIOGRID_SEED, example_seed_two)
        self.assertEqual(mediogrid.config.MEDIOGRID_DEFAULT_VO, "meteo")
        os.environ.pop("MEDIOGRID_SEED", None)
        os.environ.pop("MEDIOGRID_DEFAULT_VO", None)
        mediogrid.config.reset()


class ConfigGrammarTests(unittest.TestCase):

    def test_comments_and_blank_lines_are_ignored(self):
        document = parse_document("""
# a comment
[cluster a]   # trailing comment
node a1 capacity_gb=1 role=storage
""")
        self.assertEqual(document.data["clusters"][0]["name"], "a")
        self.assertEqual(document.data["clusters"][0]["nodes"][0]["capacity_bytes"], 10 ** 9)

    def test_rtt_spellings_collapse(self):
        document = parse_document("[cluster a]\nrtt_ms=50\nnode a1 capacity_gb=1 role=storage\n")
        self.assertEqual(document.data["clusters"][0]["link"]["rtt"], 0.05)

    def test_unknown_key_names_its_line(self):
        with self.assertRaises(ConfigError) as context:
            parse_document("[cluster a]\nnode a1 capacity_gb=1 role=storage\nspeed=4\n")
        self.assertEqual(context.exception.lineno, 3)
        self.assertIn("line 3", str(context.exception))

    def test_unknown_section(self):
        with self.assertRaises(ConfigError) as context:
            parse_document("\n[routers]\n")
        self.assertEqual(context.exception.lineno, 2)

    def test_entry_outside_section(self):
        with self.assertRaises(ConfigError) as context:
            parse_document("gamma=0.1\n")
        self.assertEqual(context.exception.lineno, 1)

    def test_invalid_value(self):
        with self.assertRaises(ConfigError) as context:
            parse_document("[defaults]\ngamma=lots\n")
        self.assertEqual(context.exception.lineno, 2)

    def test_key_given_twice(self):
        with self.assertRaises(ConfigError):
            parse_document("[defaults]\ngamma=0.1 gamma=0.2\n")

    def test_schema_violation_is_located(self):
        with self.assertRaises(ConfigError) as context:
            parse_document("[cluster a]\nnode a1 capacity_gb=1 role=storage\n\n[sched]\nalpha=2\n")
        self.assertEqual(context.exception.lineno, 5)

    def test_bad_role(self):
        with self.assertRaises(ConfigError) as context:
            parse_document("[cluster a]\nnode a1 capacity_gb=1 role=router\n")
        self.assertEqual(context.exception.lineno, 2)

    def test_replication_targets(self):
        document = parse_document("[replication]\nacquisition=a1\ntarget b=b1\ntarget c=c1\n")
        self.assertEqual(document.section("replication")["targets"], {"b": "b1", "c": "c1"})
        self.assertEqual(document.line_of("replication", "targets", "c"), 4)
        with self.assertRaises(ConfigError):
            parse_document("[replication]\ntarget b=b1\ntarget b=b2\n")

    def test_list_and_bool_values(self):
        document = parse_document("[workload]\nvos=meteo,hydro\n\n[sched]\nreuse=off pipeline=on\n")
        self.assertEqual(document.section("workload")["vos"], ["meteo", "hydro"])
        self.assertFalse(document.section("sched")["reuse"])
        self.assertTrue(document.section("sched")["pipeline"])


if __name__ == '__main__':
    unittest.main()
