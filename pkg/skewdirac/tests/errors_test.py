from ..errors import (
    CholeskyError,
    DiracError,
    DomainError,
    OverflowDomainError,
    ValidationError,
    VerificationError,
    exit_code_for,
)


def test_message_names_module_and_index():
    error = OverflowDomainError("entry exceeds 1e300", module="skewdirac.dirac", index=12)
    assert str(error) == "skewdirac.dirac[12]: entry exceeds 1e300"
    assert str(ValidationError("bad n")) == "skewdirac: bad n"


def test_hierarchy():
    assert issubclass(ValidationError, ValueError)
    assert issubclass(CholeskyError, DomainError)
    assert issubclass(VerificationError, DiracError)
    assert not issubclass(DomainError, ValidationError)


def test_exit_codes():
    assert exit_code_for(ValidationError("x")) == 2
    assert exit_code_for(CholeskyError("x")) == 3
    assert exit_code_for(VerificationError("x")) == 4
    assert exit_code_for(KeyError("n")) == 2
    assert exit_code_for(FileNotFoundError("weyl.csv")) == 2
    assert exit_code_for(PermissionError("out.csv")) == 2
    assert exit_code_for(RuntimeError("x")) == 1


if __name__ == "__main__":
    test_message_names_module_and_index()
    test_hierarchy()
    test_exit_codes()
    print("============ ALL TESTS PASSED ============")
