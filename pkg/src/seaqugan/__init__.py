"""Hybrid quantum-classical GANs that generate 4-port sea-distance graphs."""

from .data_pipeline import Dataset, Port, build_dataset, bundled_dataset, great_circle_nm, load_ports
from .evaluation import kde_fit, pooled_weight_std, triangle_valid, valid_fraction
from .gan_engine import MODELS, GeneratorConfig, TrainConfig, generate, train, train_seed
from .quantum_sim import AnsatzFamily, AnsatzSpec, param_count, run_generator_circuit

__version__ = "0.1.0"
