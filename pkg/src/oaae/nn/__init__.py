from .layers import (ConfigurationError, Conv2d, ConvTranspose2d, Flatten, LeakyReLU, Linear,
                     Reshape, Sigmoid)
from .losses import bce_logit, cross_entropy, mse, squared_error
from .model import (CheckpointError, ModelBundle, build_model, load_checkpoint,
                    save_checkpoint)
from .network import Network
from .optim import AdamState, adam_step
