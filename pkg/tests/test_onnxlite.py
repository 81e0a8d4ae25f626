"""ONNX loader/executor tests against independently encoded model bytes."""

import numpy as np
import pytest

from drowsewatch.onnxlite import OnnxError, OnnxModel

import onnx_builder as ob


def build_gemm_sigmoid() -> bytes:
    """y = sigmoid(x @ W^T + b) with hand-picked weights."""
    w = np.array([[1.0, -2.0, 0.5]], dtype=np.float32)  # (1, 3), transB
    b = np.array([0.25], dtype=np.float32)
    g = ob.graph(
        nodes=[
            ob.node("Gemm", ["x", "W", "b"], ["z"], ob.attr_int("transB", 1)),
            ob.node("Sigmoid", ["z"], ["y"]),
        ],
        initializers=[ob.tensor("W", w), ob.tensor("b", b)],
        inputs=[ob.value_info("x", [1, 3])],
        outputs=[ob.value_info("y", [1, 1])],
    )
    return ob.model(g)


class TestParsing:
    def test_metadata(self):
        m = OnnxModel.from_bytes(build_gemm_sigmoid())
        assert m.ir_version == 8
        assert m.opset == 13
        assert m.input_names == ["x"]
        assert m.output_names == ["y"]
        assert m.input_shape("x") == [1, 3]
        assert m.output_shape("y") == [1, 1]

    def test_float_data_and_unpacked_dims_accepted(self):
        w = np.array([[2.0, 3.0]], dtype=np.float32)
        g = ob.graph(
            nodes=[ob.node("Gemm", ["x", "W"], ["y"], ob.attr_int("transB", 1))],
            initializers=[ob.tensor("W", w, use_raw=False)],
            inputs=[ob.value_info("x", [1, 2])],
            outputs=[ob.value_info("y", [1, 1])],
        )
        m = OnnxModel.from_bytes(ob.model(g))
        out = m.run({"x": np.array([[1.0, 1.0]], dtype=np.float32)})
        assert out["y"][0, 0] == pytest.approx(5.0)

    def test_garbage_rejected(self):
        with pytest.raises(OnnxError):
            OnnxModel.from_bytes(b"\xff\xff\xff\xff\xff\xff")

    def test_missing_graph_rejected(self):
        with pytest.raises(OnnxError, match="no graph"):
            OnnxModel.from_bytes(ob.field_varint(1, 8))


class TestExecution:
    def test_gemm_sigmoid_matches_hand_computation(self):
        m = OnnxModel.from_bytes(build_gemm_sigmoid())
        x = np.array([[1.0, 0.5, 2.0]], dtype=np.float32)
        # z = 1*1 - 2*0.5 + 0.5*2 + 0.25 = 1.25
        expected = 1.0 / (1.0 + np.exp(-1.25))
        out = m.run({"x": x})
        assert out["y"][0, 0] == pytest.approx(expected, abs=1e-6)

    def test_conv_hand_computed(self):
        # 1x1x3x3 input, single 2x2 kernel of ones, stride 1, no padding:
        # each output is the sum of a 2x2 patch.
        w = np.ones((1, 1, 2, 2), dtype=np.float32)
        g = ob.graph(
            nodes=[
                ob.node(
                    "Conv", ["x", "W"], ["y"],
                    ob.attr_ints("kernel_shape", [2, 2]),
                    ob.attr_ints("strides", [1, 1]),
                    ob.attr_ints("pads", [0, 0, 0, 0]),
                )
            ],
            initializers=[ob.tensor("W", w)],
            inputs=[ob.value_info("x", [1, 1, 3, 3])],
            outputs=[ob.value_info("y", [1, 1, 2, 2])],
        )
        m = OnnxModel.from_bytes(ob.model(g))
        x = np.arange(9, dtype=np.float32).reshape(1, 1, 3, 3)
        out = m.run({"x": x})["y"]
        assert out.shape == (1, 1, 2, 2)
        np.testing.assert_allclose(out[0, 0], [[0 + 1 + 3 + 4, 1 + 2 + 4 + 5], [3 + 4 + 6 + 7, 4 + 5 + 7 + 8]])

    def test_conv_stride_pad_bias(self):
        w = np.array([[[[1.0]]]], dtype=np.float32)  # identity 1x1 kernel
        b = np.array([10.0], dtype=np.float32)
        g = ob.graph(
            nodes=[
                ob.node(
                    "Conv", ["x", "W", "b"], ["y"],
                    ob.attr_ints("kernel_shape", [1, 1]),
                    ob.attr_ints("strides", [2, 2]),
                    ob.attr_ints("pads", [1, 1, 0, 0]),
                )
            ],
            initializers=[ob.tensor("W", w), ob.tensor("b", b)],
            inputs=[ob.value_info("x", [1, 1, 3, 3])],
            outputs=[ob.value_info("y", [1, 1, 2, 2])],
        )
        m = OnnxModel.from_bytes(ob.model(g))
        x = np.arange(9, dtype=np.float32).reshape(1, 1, 3, 3)
        out = m.run({"x": x})["y"]
        # padded input is 4x4 with a zero top row and left column; stride 2
        # samples padded positions (0,0), (0,2), (2,0), (2,2) = 0, 0, 0, 4
        np.testing.assert_allclose(out[0, 0], [[10, 10], [10, 14]])

    def test_maxpool(self):
        g = ob.graph(
            nodes=[
                ob.node(
                    "MaxPool", ["x"], ["y"],
                    ob.attr_ints("kernel_shape", [2, 2]),
                    ob.attr_ints("strides", [2, 2]),
                )
            ],
            initializers=[],
            inputs=[ob.value_info("x", [1, 1, 4, 4])],
            outputs=[ob.value_info("y", [1, 1, 2, 2])],
        )
        m = OnnxModel.from_bytes(ob.model(g))
        x = np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4)
        out = m.run({"x": x})["y"]
        np.testing.assert_allclose(out[0, 0], [[5, 7], [13, 15]])

    def test_relu_flatten_transpose_global_pools(self):
        g = ob.graph(
            nodes=[
                ob.node("Transpose", ["x"], ["t"], ob.attr_ints("perm", [0, 3, 1, 2])),
                ob.node("Relu", ["t"], ["r"]),
                ob.node("GlobalAveragePool", ["r"], ["ga"]),
                ob.node("GlobalMaxPool", ["r"], ["gm"]),
                ob.node("Flatten", ["ga"], ["fa"], ob.attr_int("axis", 1)),
                ob.node("Flatten", ["gm"], ["fm"], ob.attr_int("axis", 1)),
            ],
            initializers=[],
            inputs=[ob.value_info("x", [1, 2, 2, 3])],
            outputs=[ob.value_info("fa", [1, 3]), ob.value_info("fm", [1, 3])],
        )
        m = OnnxModel.from_bytes(ob.model(g))
        x = np.array(
            [[[[1, -1, 2], [3, -2, 0]], [[-5, 4, 1], [7, 0, -3]]]], dtype=np.float32
        )  # NHWC
        out = m.run({"x": x})
        relu_nchw = np.maximum(np.transpose(x, (0, 3, 1, 2)), 0)
        np.testing.assert_allclose(out["fa"], relu_nchw.mean(axis=(2, 3)))
        np.testing.assert_allclose(out["fm"], relu_nchw.max(axis=(2, 3)))

    def test_batchnorm_and_reshape(self):
        scale = np.array([2.0], dtype=np.float32)
        bias = np.array([1.0], dtype=np.float32)
        mean = np.array([0.5], dtype=np.float32)
        var = np.array([4.0], dtype=np.float32)
        shape = np.array([1, 4], dtype=np.int64)
        g = ob.graph(
            nodes=[
                ob.node(
                    "BatchNormalization",
                    ["x", "scale", "bias", "mean", "var"],
                    ["bn"],
                    ob.attr_float("epsilon", 0.0),
                ),
                ob.node("Reshape", ["bn", "shape"], ["y"]),
            ],
            initializers=[
                ob.tensor("scale", scale),
                ob.tensor("bias", bias),
                ob.tensor("mean", mean),
                ob.tensor("var", var),
                ob.tensor("shape", shape),
            ],
            inputs=[ob.value_info("x", [1, 1, 2, 2])],
            outputs=[ob.value_info("y", [1, 4])],
        )
        m = OnnxModel.from_bytes(ob.model(g))
        x = np.array([[[[0.5, 2.5], [4.5, -1.5]]]], dtype=np.float32)
        out = m.run({"x": x})["y"]
        np.testing.assert_allclose(out, [[1.0, 3.0, 5.0, -1.0]], atol=1e-6)

    def test_unsupported_op_raises(self):
        g = ob.graph(
            nodes=[ob.node("LSTM", ["x"], ["y"])],
            initializers=[],
            inputs=[ob.value_info("x", [1, 1])],
            outputs=[ob.value_info("y", [1, 1])],
        )
        m = OnnxModel.from_bytes(ob.model(g))
        with pytest.raises(OnnxError, match="unsupported op"):
            m.run({"x": np.zeros((1, 1), dtype=np.float32)})

    def test_missing_feed_raises(self):
        m = OnnxModel.from_bytes(build_gemm_sigmoid())
        with pytest.raises(OnnxError, match="missing model inputs"):
            m.run({})

    def test_run_is_deterministic(self):
        m = OnnxModel.from_bytes(build_gemm_sigmoid())
        x = np.array([[0.1, -0.7, 3.0]], dtype=np.float32)
        a = m.run({"x": x})["y"]
        b = m.run({"x": x})["y"]
        assert np.array_equal(a, b)
