import pytest

from i2iaug.config import PipelineConfig, load_config, parse_override
from i2iaug.exceptions import ConfigError


def write(tmp_path, text, name="p.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults_mirror_deployment():
    c = PipelineConfig()
    assert c.generator.alpha == 4.0 and c.generator.beta == 1.0
    assert c.augmentation.confidence_threshold == 1.0 and c.augmentation.history_window == 10
    assert c.backend.k1 == 20.0 and c.backend.bpr.factors == 100 and c.backend.click_cap == 1000
    assert c.backend.top_k == 200 and c.index.k == 200 and c.eval.m == 100
    assert c.long_tail_fraction == 0.2


def test_full_file(tmp_path):
    p = write(tmp_path, """
[data]
interactions = "events.tsv"
out_dir = "out"
[long_tail]
fraction = 0.25
[generator]
epochs = 3
alpha = 2
[backend]
name = "bm25"
[bm25]
k1 = 1.5
[bpr]
lr = 0.1
reg = 0.0
[topk]
K = 50
[eval]
ks = [10, 5, 20]
n = 20
[pipeline]
variant = "baseline"
""")
    c = load_config(p)
    assert c.data.interactions == str(tmp_path / "events.tsv")
    assert c.data.out_dir == str(tmp_path / "out")
    assert c.generator.alpha == 2.0 and isinstance(c.generator.alpha, float)
    assert c.backend.name == "bm25" and c.backend.k1 == 1.5 and c.backend.top_k == 50
    assert c.backend.bpr.learning_rate == 0.1 and c.backend.bpr.regularization == 0.0
    assert c.eval.ks == (5, 10, 20) and c.variant == "baseline"


def test_round_trip_and_hash(tmp_path):
    c = load_config(write(tmp_path, "[generator]\nepochs = 3\n"))
    assert PipelineConfig.from_dict(c.to_dict()) == c
    assert c.hash() == PipelineConfig.from_dict(c.to_dict()).hash()
    moved = c.with_overrides({"data.out_dir": "/elsewhere"})
    assert moved.hash() == c.hash()
    assert c.with_overrides({"generator.seed": 5}).hash() != c.hash()


@pytest.mark.parametrize("text,field", [
    ("[nosuch]\nx = 1\n", "nosuch"),
    ("[generator]\nalphaa = 1\n", "generator.alphaa"),
    ("[generator]\nepochs = 1.5\n", "generator.epochs"),
    ("[generator]\nalpha = \"big\"\n", "generator.alpha"),
    ("[llm]\nrequest_logprobs = 1\n", "llm.request_logprobs"),
    ("[augmentation]\nconfidence_threshold = 1.5\n", "augmentation"),
    ("[backend]\nname = \"dnn\"\n", "backend.name"),
    ("[eval]\nks = [5, 10]\nn = 5\n", "eval"),
    ("[eval]\nks = [\"a\"]\n", "eval.ks"),
    ("[long_tail]\nfraction = 0\n", "long_tail.fraction"),
    ("[pipeline]\nvariant = \"wo_everything\"\n", "pipeline.variant"),
    ("[llm]\nmode = \"remote\"\n", "llm"),
    ("[data]\nformat = \"csv\"\n", "data.format"),
    ("generator = 3\n", "generator"),
    ("[generator\n", "config"),
])
def test_invalid_configs_name_the_field(tmp_path, text, field):
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, text))
    assert exc.value.field == field


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


def test_parse_override():
    assert parse_override("augmentation.confidence_threshold=0.9") == \
        ("augmentation.confidence_threshold", 0.9)
    assert parse_override("eval.ks=[1, 5]") == ("eval.ks", [1, 5])
    assert parse_override("backend.name=bm25") == ("backend.name", "bm25")
    assert parse_override("llm.request_logprobs=true") == ("llm.request_logprobs", True)
    with pytest.raises(ConfigError):
        parse_override("novalue")
    with pytest.raises(ConfigError):
        parse_override("nodot=3")


def test_overrides_revalidate():
    c = PipelineConfig()
    assert c.with_overrides({"bpr.factors": 8}).backend.bpr.factors == 8
    with pytest.raises(ConfigError):
        c.with_overrides({"augmentation.recall_number": 0})
    with pytest.raises(ConfigError):
        c.with_overrides({"flat": 1})
