"""
SNN Package - integrate-and-fire simulation, closed-form activation and fine-tuning.
"""

from .neuron import (
    MembraneState,
    integrate_and_fire,
    if_step,
    scaled_if_step,
    closed_form_activation,
    surrogate_grad,
)

from .network import (
    NeuronParams,
    SpikingNetwork,
    SpikeTrace,
    snn_forward,
    snn_predict,
    snn_accuracy,
    save_spiking_network,
    load_spiking_network,
)

from .finetune import finetune_sgl, sgl_gradients, snn_dataset_loss

__all__ = [
    # Neuron
    "MembraneState",
    "integrate_and_fire",
    "if_step",
    "scaled_if_step",
    "closed_form_activation",
    "surrogate_grad",
    # Network
    "NeuronParams",
    "SpikingNetwork",
    "SpikeTrace",
    "snn_forward",
    "snn_predict",
    "snn_accuracy",
    "save_spiking_network",
    "load_spiking_network",
    # Fine-tuning
    "finetune_sgl",
    "sgl_gradients",
    "snn_dataset_loss",
]
