import gzip
import struct

import numpy as np
import pytest

from regionlab.models.datasets import (
    MNIST_IMAGE_MAGIC,
    MNIST_LABEL_MAGIC,
    Dataset,
    SpiralSpec,
    load_mnist,
    load_mnist_dir,
    make_spiral,
)
from regionlab.models.errors import DatasetMissingError, EmptyClassError, IdxFormatError


def write_idx(tmp_path, images, labels, image_magic=MNIST_IMAGE_MAGIC, compress=False, prefix="train"):
    count, rows, cols = images.shape
    image_bytes = struct.pack(">4I", image_magic, count, rows, cols) + images.astype(np.uint8).tobytes()
    label_bytes = struct.pack(">2I", MNIST_LABEL_MAGIC, len(labels)) + np.asarray(labels, dtype=np.uint8).tobytes()
    suffix = ".gz" if compress else ""
    image_path = tmp_path / f"{prefix}-images-idx3-ubyte{suffix}"
    label_path = tmp_path / f"{prefix}-labels-idx1-ubyte{suffix}"
    image_path.write_bytes(gzip.compress(image_bytes) if compress else image_bytes)
    label_path.write_bytes(gzip.compress(label_bytes) if compress else label_bytes)
    return image_path, label_path


def test_spiral_is_balanced_and_bounded():
    data = make_spiral(SpiralSpec(points_per_class=100, seed=3))
    assert data.inputs.shape == (200, 2)
    assert np.bincount(data.labels).tolist() == [100, 100]
    assert data.inputs.min() >= -1.0 and data.inputs.max() <= 1.0


def test_spiral_is_deterministic():
    spec = SpiralSpec(points_per_class=4, noise_std=0.0, seed=0)
    first, second = make_spiral(spec), make_spiral(spec)
    assert np.array_equal(first.inputs, second.inputs)
    # the second spiral is the first one rotated by pi
    assert np.allclose(first.inputs[:4], -first.inputs[4:])


def test_spiral_spec_validation():
    with pytest.raises(ValueError):
        SpiralSpec(points_per_class=0)
    with pytest.raises(ValueError):
        SpiralSpec(noise_std=-1.0)


def test_dataset_validation_and_split():
    with pytest.raises(ValueError):
        Dataset(np.full((2, 2), 1.5), [0, 1])
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), [0])
    data = make_spiral(SpiralSpec(points_per_class=50))
    rest, held = data.split(0.1, seed=0)
    assert len(held) == 10 and len(rest) == 90
    with pytest.raises(EmptyClassError):
        data.class_inputs(5)


def test_load_mnist_maps_pixels(tmp_path):
    images = np.zeros((3, 2, 2), dtype=np.uint8)
    images[0, 0, 0] = 255
    images[1, 1, 1] = 128
    image_path, label_path = write_idx(tmp_path, images, [7, 1, 0])
    data = load_mnist(image_path, label_path)
    assert data.inputs.shape == (3, 4)
    assert data.inputs[0, 0] == 1.0
    assert data.inputs[0, 1] == -1.0
    assert data.inputs[1, 3] == pytest.approx(128 / 127.5 - 1.0)
    assert data.labels.tolist() == [7, 1, 0]


def test_load_mnist_gzip_directory(tmp_path):
    images = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
    write_idx(tmp_path, images, [4, 2], compress=True, prefix="t10k")
    data = load_mnist_dir(tmp_path, "t10k")
    assert data.input_dim == 9
    assert data.labels.tolist() == [4, 2]


def test_load_mnist_errors(tmp_path):
    images = np.zeros((2, 2, 2), dtype=np.uint8)
    image_path, label_path = write_idx(tmp_path, images, [0, 1])
    image_path.write_bytes(struct.pack(">4I", 0xDEADBEEF, 2, 2, 2) + images.tobytes())
    with pytest.raises(IdxFormatError) as info:
        load_mnist(image_path, label_path)
    assert info.value.offset == 0

    image_path.write_bytes(struct.pack(">4I", MNIST_IMAGE_MAGIC, 2, 2, 2) + images.tobytes()[:5])
    with pytest.raises(IdxFormatError) as info:
        load_mnist(image_path, label_path)
    assert info.value.offset == 21

    image_path, label_path = write_idx(tmp_path, images, [0, 1, 2])
    with pytest.raises(IdxFormatError):
        load_mnist(image_path, label_path)

    with pytest.raises(DatasetMissingError):
        load_mnist_dir(tmp_path / "nowhere")
