import os

import pytest

from src.main import create_app
from src.models.annotation import Instance, Prediction
from src.models.box import BBox

FIXTURES = os.path.join(os.path.dirname(__file__), 'fixtures')


@pytest.fixture
def fixture_path():
    def _path(name):
        return os.path.join(FIXTURES, name)
    return _path


@pytest.fixture
def make_instance():
    def _make(id, box, image_id=1, category_id=1, iscrowd=False):
        return Instance(id=id, image_id=image_id, category_id=category_id, box=BBox(*box), iscrowd=iscrowd)
    return _make


@pytest.fixture
def make_prediction():
    def _make(box, score, image_id=1, category_id=1):
        return Prediction(image_id=image_id, box=BBox(*box), scores={category_id: score})
    return _make


@pytest.fixture
def app():
    app = create_app({
        'TESTING': True,
        'SQLALCHEMY_DATABASE_URI': 'sqlite:///:memory:'
    })
    yield app


@pytest.fixture
def client(app):
    return app.test_client()
