from pathlib import Path

import pytest

from extractor_fixtures import FIXTURE_ROWS, build_checkpoint, make_xml


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> Path:
    return build_checkpoint(tmp_path_factory.mktemp("tiny-model"))


@pytest.fixture
def fixture_corpus_file(tmp_path) -> Path:
    path = tmp_path / "train.xml"
    path.write_bytes(make_xml(FIXTURE_ROWS))
    return path


@pytest.fixture
def fixture_corpus(fixture_corpus_file):
    from senseknn.corpus import Split, parse_lexical_sample

    return parse_lexical_sample(fixture_corpus_file.read_bytes(), None, Split.TRAIN)
