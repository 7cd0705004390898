"""
Test Suite: Spiking Network Simulation

This test module ensures that:
- IF neurons integrate, fire on >= threshold and reset as configured
- The batched forward pass equals a dense per-neuron, per-step oracle exactly
- Outputs are causal: a clipped input yields the prefix of the full run
- Synaptic operations match a brute-force fan-out enumeration
- Parameter files round-trip losslessly and reject foreign or corrupt data
"""

from collections import OrderedDict

import numpy as np
import pytest
import torch

from spiketex.aer.transforms import SpikeTensor, clip
from spiketex.core.errors import ArgumentError, FormatError, IncompatibleModelError, NumericError
from spiketex.snn.network import (
    LayerSpec,
    NetworkSpec,
    Parameters,
    PoolKind,
    count_synops,
    forward,
    forward_batch,
    init_params,
    predict,
    predict_from_scores,
    spec_hash,
)
from spiketex.snn.neurons import IFConfig, ResetMode, if_step
from spiketex.snn.params_io import decode_params, describe_params, encode_params, load_params, save_params
from spiketex.snn.surrogate import SurrogateKind, SurrogateSpec, spike_function

# =====================
# IF Neurons
# =====================

def test_if_step_no_input_no_spike():
    v, s = if_step(np.zeros(3), np.zeros(3))
    assert s.tolist() == [0, 0, 0]
    assert v.tolist() == [0.0, 0.0, 0.0]


def test_if_constant_input_spike_times():
    cfg = IFConfig(threshold=1.0, reset=ResetMode.SUBTRACT)
    v = np.zeros(1)
    fired = []
    for step in range(1, 11):
        v, s = if_step(v, np.array([0.4]), cfg)
        if s[0]:
            fired.append(step)
    assert fired == [3, 5, 8, 10], f"❌ Unexpected spike steps {fired}"


def test_if_input_equal_to_threshold_spikes():
    v, s = if_step(np.zeros(1), np.ones(1))
    assert s[0] == 1
    assert v[0] == 0.0


def test_if_reset_to_zero_and_floor():
    cfg = IFConfig(reset=ResetMode.ZERO)
    v, s = if_step(np.array([0.5, 0.0]), np.array([0.7, -2.0]), cfg)
    assert s.tolist() == [1, 0]
    # to-zero reset, and the default floor at 0
    assert v.tolist() == [0.0, 0.0]


def test_if_without_floor_goes_negative():
    v, _ = if_step(np.zeros(1), np.array([-0.5]), IFConfig(lower_bound=None))
    assert v[0] == -0.5


def test_if_shape_mismatch():
    with pytest.raises(ArgumentError):
        if_step(np.zeros(2), np.zeros(3))


def test_if_non_finite_input():
    with pytest.raises(NumericError):
        if_step(np.zeros(2), np.array([0.1, np.nan]))


def test_if_accepts_torch_tensors():
    v, s = if_step(torch.zeros(2), torch.tensor([1.5, 0.2]))
    assert isinstance(s, torch.Tensor)
    assert s.tolist() == [1.0, 0.0]


# =====================
# Surrogates
# =====================

@pytest.mark.parametrize(
    "spec",
    [SurrogateSpec(), SurrogateSpec(kind=SurrogateKind.BOXCAR, scale=1.0)],
)
def test_surrogate_derivative_nonnegative_and_bounded(spec):
    x = torch.linspace(-5, 5, 1001, dtype=torch.float64)
    d = spec.derivative(x)
    assert torch.all(d >= 0)
    assert float(d.max()) <= max(spec.scale / 2, 1 / spec.scale) + 1e-12


def test_surrogate_primitive_integrates_derivative():
    spec = SurrogateSpec(scale=3.0)
    x = torch.linspace(-2, 2, 41, dtype=torch.float64, requires_grad=True)
    spec.primitive(x).sum().backward()
    torch.testing.assert_close(x.grad, spec.derivative(x.detach()))


def test_surrogate_spike_is_heaviside_forward():
    x = torch.tensor([-0.1, 0.0, 0.3], dtype=torch.float64, requires_grad=True)
    spikes = spike_function(SurrogateSpec())(x)
    assert spikes.tolist() == [0.0, 1.0, 1.0]
    spikes.sum().backward()
    torch.testing.assert_close(x.grad, SurrogateSpec().derivative(x.detach()))


def test_fast_sigmoid_needs_positive_scale():
    with pytest.raises(ValueError):
        SurrogateSpec(kind=SurrogateKind.FAST_SIGMOID, scale=0.0)


# =====================
# Network Spec
# =====================

def test_default_network_shapes():
    spec = NetworkSpec.default()
    shapes = spec.layer_shapes()
    assert shapes[0] == (16, 20, 20)
    assert shapes[2] == (16, 10, 10)
    assert shapes[5] == (32, 5, 5)
    assert shapes[-1] == (10,)
    params = spec.parameter_shapes()
    assert params["linear6.weight"] == (256, 800)
    assert params["linear10.bias"] == (10,)


def test_layer_pattern_is_enforced():
    with pytest.raises(ValueError):
        NetworkSpec(layers=(LayerSpec.linear(10),))
    with pytest.raises(ValueError):
        NetworkSpec(layers=(LayerSpec.conv(2), LayerSpec.spiking(), LayerSpec.pooling(2), LayerSpec.linear(5)))


def test_spec_hash_is_stable(tiny_spec):
    copy = NetworkSpec.model_validate_json(tiny_spec.model_dump_json())
    assert spec_hash(copy) == spec_hash(tiny_spec)
    assert spec_hash(tiny_spec) != spec_hash(NetworkSpec.default())


def test_init_params_is_seeded(tiny_spec):
    assert init_params(tiny_spec, 3) == init_params(tiny_spec, 3)
    assert init_params(tiny_spec, 3) != init_params(tiny_spec, 4)
    assert torch.all(init_params(tiny_spec, 3)["conv0.bias"] == 0)


# =====================
# Dense Oracle
# =====================

def _dyadic_params(spec, rng):
    """Weights on a 1/8 grid: every sum is exact in float32 and float64"""
    tensors = OrderedDict()
    for name, shape in spec.parameter_shapes().items():
        values = rng.integers(-6, 9, size=shape) / 8.0
        tensors[name] = torch.tensor(values, dtype=torch.float32)
    return Parameters(tensors)


def _oracle(spec, params, counts):
    """Per-neuron, per-step simulation of the tiny Conv -> IF -> SumPool -> Linear stack"""
    w0 = params["conv0.weight"].double().numpy()
    b0 = params["conv0.bias"].double().numpy()
    w3 = params["linear3.weight"].double().numpy()
    b3 = params["linear3.bias"].double().numpy()
    t_steps, channels, h, w = counts.shape
    out_c = w0.shape[0]
    padded = np.zeros((t_steps, channels, h + 2, w + 2))
    padded[:, :, 1:-1, 1:-1] = counts

    v = np.zeros((out_c, h, w))
    scores = np.zeros(10)
    cumulative, spike_totals = [], []
    for t in range(t_steps):
        spikes = np.zeros((out_c, h, w))
        for o in range(out_c):
            for y in range(h):
                for x in range(w):
                    current = b0[o]
                    for c in range(channels):
                        for ky in range(3):
                            for kx in range(3):
                                current += w0[o, c, ky, kx] * padded[t, c, y + ky, x + kx]
                    v[o, y, x] += current
                    if v[o, y, x] >= 1.0:
                        spikes[o, y, x] = 1.0
                        v[o, y, x] -= 1.0
                    v[o, y, x] = max(v[o, y, x], 0.0)
        pooled = spikes.reshape(out_c, h // 2, 2, w // 2, 2).sum(axis=(2, 4)).reshape(-1)
        scores = scores + (w3 @ pooled + b3)
        cumulative.append(scores.copy())
        spike_totals.append(spikes.sum())
    return np.array(cumulative), np.array(spike_totals)


@pytest.mark.parametrize("case", range(5))
def test_forward_equals_dense_oracle(tiny_spec, case):
    rng = np.random.default_rng(100 + case)
    params = _dyadic_params(tiny_spec, rng)
    tensor = SpikeTensor(counts=rng.integers(0, 3, (12, 1, 4, 4)).astype(np.int32))

    scores, trace = forward(tiny_spec, params, tensor)
    cumulative, spike_totals = _oracle(tiny_spec, params, tensor.counts)

    np.testing.assert_array_equal(trace.cumulative, cumulative)
    np.testing.assert_array_equal(trace.spike_counts["if1"], spike_totals)
    np.testing.assert_array_equal(scores, cumulative[-1])


def _batched_oracle(params, counts):
    """Dense simulation of a (batch, t, C, H, W) input: every neuron updated at every step"""
    w0 = params["conv0.weight"].double().numpy()
    b0 = params["conv0.bias"].double().numpy()
    w3 = params["linear3.weight"].double().numpy()
    b3 = params["linear3.bias"].double().numpy()
    batch, t_steps, channels, h, w = counts.shape
    out_c = w0.shape[0]
    padded = np.zeros((batch, t_steps, channels, h + 2, w + 2))
    padded[..., 1:-1, 1:-1] = counts

    v = np.zeros((batch, out_c, h, w))
    scores = np.zeros((batch, 10))
    cumulative, spike_totals = [], []
    for t in range(t_steps):
        current = np.broadcast_to(b0[None, :, None, None], v.shape).copy()
        for c in range(channels):
            for ky in range(3):
                for kx in range(3):
                    current += w0[None, :, c, ky, kx, None, None] * padded[:, t, c, None, ky : ky + h, kx : kx + w]
        v += current
        spikes = (v >= 1.0).astype(np.float64)
        v = np.maximum(v - spikes, 0.0)
        pooled = spikes.reshape(batch, out_c, h // 2, 2, w // 2, 2).sum(axis=(3, 5)).reshape(batch, -1)
        scores = scores + (pooled @ w3.T + b3)
        cumulative.append(scores.copy())
        spike_totals.append(spikes.reshape(batch, -1).sum(axis=1))
    return np.stack(cumulative, axis=1), np.stack(spike_totals, axis=1)


def test_forward_batch_equals_dense_oracle_on_many_cases(tiny_spec):
    """100 weight draws x 100 inputs each: 10^4 randomized networks-and-inputs"""
    rng = np.random.default_rng(2024)
    cases = 0
    for draw in range(100):
        params = _dyadic_params(tiny_spec, rng)
        counts = rng.integers(0, 3, (100, 12, 1, 4, 4)).astype(np.float64)

        _, trace = forward_batch(tiny_spec, params, torch.from_numpy(counts), collect=True)
        cumulative, spike_totals = _batched_oracle(params, counts)

        np.testing.assert_array_equal(trace.cumulative.numpy(), cumulative, err_msg=f"❌ draw {draw}")
        np.testing.assert_array_equal(trace.spike_counts["if1"].numpy(), spike_totals, err_msg=f"❌ draw {draw}")
        cases += counts.shape[0]
    assert cases >= 10_000


def test_zero_input_zero_bias_gives_zero_scores(tiny_spec, tiny_params):
    tensor = SpikeTensor(counts=np.zeros((10, 1, 4, 4), dtype=np.int32))
    scores, trace = forward(tiny_spec, tiny_params, tensor)
    assert np.all(scores == 0)
    assert count_synops(trace)["total"] == 0


def test_forward_is_deterministic(tiny_spec, tiny_params, rng):
    tensor = SpikeTensor(counts=rng.integers(0, 2, (30, 1, 4, 4)).astype(np.int32))
    first_scores, first = forward(tiny_spec, tiny_params, tensor, record_spikes=True)
    second_scores, second = forward(tiny_spec, tiny_params, tensor, record_spikes=True)
    np.testing.assert_array_equal(first_scores, second_scores)
    np.testing.assert_array_equal(first.cumulative, second.cumulative)
    for name in first.spikes:
        np.testing.assert_array_equal(first.spikes[name], second.spikes[name])


@pytest.mark.parametrize("length_ms", [1, 7, 13, 29])
def test_clipped_input_gives_prefix_of_full_run(tiny_spec, tiny_params, rng, length_ms):
    tensor = SpikeTensor(counts=rng.integers(0, 3, (30, 1, 4, 4)).astype(np.int32))
    _, full = forward(tiny_spec, tiny_params, tensor)
    short_scores, short = forward(tiny_spec, tiny_params, clip(tensor, length_ms))

    np.testing.assert_array_equal(short.readout_steps, full.readout_steps[:length_ms])
    np.testing.assert_array_equal(short_scores, full.prefix_scores(length_ms))


def test_forward_rejects_wrong_shape(tiny_spec, tiny_params):
    with pytest.raises(ArgumentError):
        forward(tiny_spec, tiny_params, SpikeTensor(counts=np.zeros((5, 1, 5, 5), dtype=np.int32)))


def test_forward_rejects_non_finite_weights(tiny_spec, tiny_params):
    broken = tiny_params.clone()
    broken.tensors["conv0.weight"][0, 0, 0, 0] = float("inf")
    with pytest.raises(NumericError):
        forward(tiny_spec, broken, SpikeTensor(counts=np.zeros((5, 1, 4, 4), dtype=np.int32)))


# =====================
# Prediction
# =====================

def test_predict_argmax_and_ties():
    assert predict_from_scores(np.array([5, 0, 0, 0, 0, 0, 0, 0, 0, 0])) == 1
    assert predict_from_scores(np.full(10, 3.0)) == 1
    assert predict_from_scores(np.array([0, 1, 4, 4, 0, 0, 0, 0, 0, 0])) == 3


def test_predict_invariant_to_positive_scaling(rng):
    scores = rng.normal(size=(50, 10))
    np.testing.assert_array_equal(predict_from_scores(scores), predict_from_scores(scores * 7.5))


def test_predict_matches_forward(tiny_spec, tiny_params, rng):
    for _ in range(5):
        tensor = SpikeTensor(counts=rng.integers(0, 3, (10, 1, 4, 4)).astype(np.int32))
        scores, _ = forward(tiny_spec, tiny_params, tensor)
        assert predict(tiny_spec, tiny_params, tensor) == int(np.argmax(scores)) + 1


# =====================
# Synaptic Operations
# =====================

def test_single_interior_spike_costs_kernel_times_channels():
    spec = NetworkSpec(
        layers=(LayerSpec.conv(16), LayerSpec.spiking(), LayerSpec.pooling(2), LayerSpec.linear(10)),
        input_shape=(1, 5, 5),
    )
    tensors = OrderedDict(
        (name, torch.full(shape, 1e-3, dtype=torch.float32) if name.endswith("weight") else torch.zeros(shape))
        for name, shape in spec.parameter_shapes().items()
    )
    counts = np.zeros((1, 1, 5, 5), dtype=np.int32)
    counts[0, 0, 2, 2] = 1

    scores, trace = forward(spec, Parameters(tensors), SpikeTensor(counts=counts))
    synops = count_synops(trace)
    assert synops["conv0"] == 9 * 16
    assert synops["linear3"] == 0
    assert synops["total"] == 9 * 16
    assert trace.spike_counts["if1"].sum() == 0
    assert np.all(scores == 0)


def test_synops_match_brute_force(tiny_spec, rng):
    params = _dyadic_params(tiny_spec, rng)
    tensor = SpikeTensor(counts=rng.integers(0, 3, (15, 1, 4, 4)).astype(np.int32))
    _, trace = forward(tiny_spec, params, tensor)
    _, spike_totals = _oracle(tiny_spec, params, tensor.counts)

    expected_conv = 0
    for t, c, y, x in zip(*np.nonzero(tensor.counts)):
        rows = sum(1 for oy in (y - 1, y, y + 1) if 0 <= oy < 4)
        cols = sum(1 for ox in (x - 1, x, x + 1) if 0 <= ox < 4)
        expected_conv += int(tensor.counts[t, c, y, x]) * 2 * rows * cols
    expected_linear = int(spike_totals.sum()) * 10

    synops = count_synops(trace)
    assert synops["conv0"] == expected_conv
    assert synops["linear3"] == expected_linear
    assert synops["total"] == expected_conv + expected_linear


# =====================
# Parameter Files
# =====================

def test_params_round_trip_bitwise(tmp_path, tiny_spec, tiny_params):
    path = tmp_path / "model.snnp"
    save_params(tiny_params, tiny_spec, path)
    loaded = load_params(path, tiny_spec)
    assert loaded == tiny_params
    assert loaded.seed == tiny_params.seed


def test_params_for_other_network_are_rejected(tmp_path, tiny_spec, tiny_params):
    path = tmp_path / "model.snnp"
    save_params(tiny_params, tiny_spec, path)
    other = tiny_spec.model_copy(update={"layers": tiny_spec.layers[:2] + (LayerSpec.pooling(2, PoolKind.AVG),) + tiny_spec.layers[3:]})
    with pytest.raises(IncompatibleModelError):
        load_params(path, other)


@pytest.mark.parametrize("step", [1, 7, 31])
def test_truncated_params_are_format_errors(tiny_spec, tiny_params, step):
    payload = encode_params(tiny_params, tiny_spec)
    for cut in range(0, len(payload), step):
        with pytest.raises(FormatError):
            decode_params(payload[:cut])


def test_corrupted_params_fail_checksum(tiny_spec, tiny_params):
    payload = bytearray(encode_params(tiny_params, tiny_spec))
    payload[40] ^= 0xFF
    with pytest.raises(FormatError):
        decode_params(bytes(payload))


def test_describe_params(tmp_path, tiny_spec, tiny_params):
    path = tmp_path / "model.snnp"
    save_params(tiny_params, tiny_spec, path)
    info = describe_params(path)
    assert info["spec_hash"] == spec_hash(tiny_spec)
    assert info["tensors"]["linear3.weight"] == [10, 8]
    assert info["parameter_count"] == 2 * 9 + 2 + 10 * 8 + 10
