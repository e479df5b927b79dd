from nn_layers.cost import CostReport, LayerCost, count_params_flops
from nn_layers.layers import (
    LSTM,
    AvgPool,
    Bottleneck,
    Conv2d,
    FullyConnected,
    SigmoidHead,
    bottleneck_forward,
    fc_forward,
    global_avg_pool,
    lstm_forward,
)
from nn_layers.registry import LayerSpec, ParamRegistry
