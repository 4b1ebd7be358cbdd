"""Link-level simulator for the two-user Z-interference channel.

Submodules:
    channel      -- channel realizations, CSI estimation/quantization, equivalent models
    modem        -- QAM constellations and maximum-likelihood detection
    nn           -- minimal dense-network engine with analytic backprop
    autoencoder  -- learned transmitter/receiver pairs and their training loop
    bersim       -- Monte Carlo bit-error-rate harness
    cli          -- command-line front end
"""

__version__ = "0.1.0"
