import pytest

from zicae import modelio
from zicae.autoencoder import TrainConfig, train

# One properly trained model shared across the suite (and seed 0 of the
# acceptance comparison): the scaled-down schedule on a narrow interval
# around alpha = 1.
DESK_CFG = TrainConfig(n_channels=500, epochs_per_channel=10, batch=1000,
                       alpha_min=0.9, alpha_max=1.1, seed=0)


@pytest.fixture(scope="session")
def desk_model():
    model, _ = train(DESK_CFG)
    return model


@pytest.fixture(scope="session")
def desk_model_file(desk_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("models") / "desk.zicmodel"
    modelio.save_model(path, desk_model, DESK_CFG)
    return path
