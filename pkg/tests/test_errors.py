"""Error types: messages, context attributes and transport between processes."""

import pickle

import pytest

from stringlab.core.errors import (
    BracketingError,
    ConfigurationError,
    DegenerateDataError,
    NearSingularError,
    NumericalFailure,
    SpecParseError,
)


class TestMessages:
    def test_spec_parse_error_location_prefix(self):
        err = SpecParseError("expected a number", path="s.json", line=3, column=7, field="q")
        assert str(err) == "s.json, line 3, column 7, field 'q': expected a number"

    def test_bracketing_error_names_the_index(self):
        assert str(BracketingError("no sign change", index=4)) == "no sign change (suspect index 4)"


class TestPickling:
    """Errors raised in sweep workers are pickled back to the parent process."""

    @pytest.mark.parametrize(
        "err, attrs",
        [
            (BracketingError("no sign change", index=4), {"index": 4}),
            (NearSingularError("too close", zeta=0.5 + 0j, eigenvalue=0.5), {"zeta": 0.5 + 0j, "eigenvalue": 0.5}),
            (DegenerateDataError("w_lambda(-1)", 1e-14), {"quantity": "w_lambda(-1)", "value": 1e-14}),
            (SpecParseError("bad", path="s.json", line=2, column=1, field="h"), {"line": 2, "field": "h"}),
            (ConfigurationError("real ζ not below"), {}),
        ],
    )
    def test_keyword_context_survives(self, err, attrs):
        """Keyword-only constructors do not break unpickling, and nothing is lost."""
        copy = pickle.loads(pickle.dumps(err))
        assert type(copy) is type(err)
        assert str(copy) == str(err)
        for name, value in attrs.items():
            assert getattr(copy, name) == value

    def test_still_caught_as_numerical_failure(self):
        copy = pickle.loads(pickle.dumps(NearSingularError("too close", zeta=1j)))
        with pytest.raises(NumericalFailure):
            raise copy
