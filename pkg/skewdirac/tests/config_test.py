import os
import tempfile

from ..config import RunConfig, describe, load_config
from ..errors import ValidationError


def test_defaults():
    config = load_config()
    assert isinstance(config, RunConfig)
    assert config.n == 400
    assert config.a == 200.0
    assert config.eta is None
    assert config.margin == 0.25
    assert config.tail_moments == 2
    assert config.continuation == "constant"


def test_layering_order():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "run.yaml")
        with open(path, "w") as fh:
            fh.write("n: 100\na: 50.0\nseed: 3\n")
        config = load_config(path, ["a=75", "workers=2"], seed=9, eta=None)
    assert config.n == 100, "YAML beats defaults"
    assert config.a == 75.0, "dotlist beats YAML"
    assert config.workers == 2
    assert config.seed == 9, "explicit values beat everything"


def test_rejects_unknown_keys_and_types():
    for overrides in (["nope=1"], ["n=abc"]):
        try:
            load_config(overrides=overrides)
        except ValidationError:
            continue
        raise AssertionError(f"{overrides} must be rejected")


def test_rejects_invalid_values():
    for explicit in ({"n": 0}, {"a": -1.0}, {"eta": -2.0}, {"continuation": "mirror"}, {"model": "kdv"}):
        try:
            load_config(**explicit)
        except ValidationError as exc:
            assert exc.exit_code == 2
            continue
        raise AssertionError(f"{explicit} must be rejected")


def test_missing_file_is_a_validation_error():
    try:
        load_config("/nonexistent/run.yaml")
    except ValidationError:
        pass
    else:
        raise AssertionError("a missing config file must be rejected")


def test_describe_lists_settings():
    text = describe(load_config(potential="zero.json"))
    lines = text.splitlines()
    assert lines[0] == "*** RUN CONFIG"
    assert "n: 400" in lines
    assert "potential: zero.json" in lines
    assert not any(line.startswith("eta:") for line in lines), "unset keys are omitted"


if __name__ == "__main__":
    test_defaults()
    test_layering_order()
    test_rejects_unknown_keys_and_types()
    test_rejects_invalid_values()
    test_missing_file_is_a_validation_error()
    test_describe_lists_settings()
    print("============ ALL TESTS PASSED ============")
