import pytest
from PIL import Image

from imagegen import draw_stair_image


@pytest.fixture
def stair_image(tmp_path):
    image, rows = draw_stair_image()
    path = tmp_path / "stairs.png"
    image.save(path)
    return str(path), rows


@pytest.fixture
def blank_image(tmp_path):
    path = tmp_path / "blank.png"
    Image.new("RGB", (320, 240), (180, 180, 180)).save(path)
    return str(path)
