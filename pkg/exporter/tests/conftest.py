import pytest
import torch
import torchvision.models

from imagegen import make_image_folder


@pytest.fixture(scope="session")
def densenet10():
    torch.manual_seed(0)
    return torchvision.models.densenet121(weights=None, num_classes=10).eval()


@pytest.fixture(scope="session")
def image_root(tmp_path_factory):
    return make_image_folder(tmp_path_factory.mktemp("images"), n_per_class=40)


@pytest.fixture(scope="session")
def small_image_root(tmp_path_factory):
    return make_image_folder(
        tmp_path_factory.mktemp("tiny"), n_per_class=1, classes=("a", "b", "c"), seed=7
    )
