import importlib.metadata

import lamstack


def test_version() -> None:
    assert lamstack.__version__ == importlib.metadata.version("lamstack")


def test_all_is_importable() -> None:
    for name in lamstack.__all__:
        assert hasattr(lamstack, name), name
    assert lamstack.__all__ == sorted(lamstack.__all__)
