"""Minimal ONNX model loader and numpy executor.

Parses the protobuf wire format directly (no onnx/onnxruntime dependency,
neither is installable here) and evaluates the small operator subset that
exported classifier graphs use: Transpose, Conv, Relu, MaxPool, global
pooling, Flatten, Reshape, Gemm, MatMul, Add, BatchNormalization, Sigmoid,
Constant, Identity and Dropout (inference mode).

Only what those graphs need is supported: 2-D convs with group=1 and
dilation=1, float32 tensors, static shapes. Unsupported constructs raise
OnnxError instead of silently misevaluating.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np


class OnnxError(Exception):
    """Malformed model file or unsupported construct."""


# --- protobuf wire format -------------------------------------------------

_WIRE_VARINT = 0
_WIRE_I64 = 1
_WIRE_LEN = 2
_WIRE_I32 = 5


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise OnnxError("truncated varint")
        b = data[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise OnnxError("varint too long")


def _signed(v: int) -> int:
    return v - (1 << 64) if v >= (1 << 63) else v


def _iter_fields(data: bytes):
    """Yield (field_number, wire_type, raw_value) triples of one message."""
    pos = 0
    while pos < len(data):
        key, pos = _read_varint(data, pos)
        fno, wt = key >> 3, key & 7
        if wt == _WIRE_VARINT:
            val, pos = _read_varint(data, pos)
        elif wt == _WIRE_I64:
            val = data[pos : pos + 8]
            pos += 8
        elif wt == _WIRE_LEN:
            ln, pos = _read_varint(data, pos)
            val = data[pos : pos + ln]
            if len(val) != ln:
                raise OnnxError("truncated length-delimited field")
            pos += ln
        elif wt == _WIRE_I32:
            val = data[pos : pos + 4]
            pos += 4
        else:
            raise OnnxError(f"unsupported wire type {wt}")
        yield fno, wt, val


def _packed_varints(wt: int, val) -> list[int]:
    """A repeated varint field, accepting both packed and unpacked encoding."""
    if wt == _WIRE_VARINT:
        return [_signed(val)]
    out = []
    pos = 0
    while pos < len(val):
        v, pos = _read_varint(val, pos)
        out.append(_signed(v))
    return out


def _packed_floats(wt: int, val) -> list[float]:
    if wt == _WIRE_I32:
        return [struct.unpack("<f", val)[0]]
    return list(struct.unpack(f"<{len(val) // 4}f", val))


# --- ONNX message subset ---------------------------------------------------

_DTYPES = {1: np.float32, 2: np.uint8, 6: np.int32, 7: np.int64, 11: np.float64}


def _parse_tensor(data: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    dtype_code = 1
    name = ""
    raw = None
    float_data: list[float] = []
    int_data: list[int] = []
    for fno, wt, val in _iter_fields(data):
        if fno == 1:
            dims.extend(_packed_varints(wt, val))
        elif fno == 2:
            dtype_code = val
        elif fno == 4:
            float_data.extend(_packed_floats(wt, val))
        elif fno in (5, 7):
            int_data.extend(_packed_varints(wt, val))
        elif fno == 8:
            name = val.decode("utf-8")
        elif fno == 9:
            raw = val
    if dtype_code not in _DTYPES:
        raise OnnxError(f"unsupported tensor data type {dtype_code}")
    dtype = _DTYPES[dtype_code]
    if raw is not None:
        arr = np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")).astype(dtype)
    elif float_data:
        arr = np.asarray(float_data, dtype=dtype)
    elif int_data:
        arr = np.asarray(int_data, dtype=dtype)
    else:
        arr = np.zeros(0, dtype=dtype)
    return name, arr.reshape(dims) if dims else arr.reshape(())


def _parse_attribute(data: bytes):
    name = ""
    value = None
    for fno, wt, val in _iter_fields(data):
        if fno == 1:
            name = val.decode("utf-8")
        elif fno == 2:
            value = _packed_floats(wt, val)[0]
        elif fno == 3:
            value = _signed(val)
        elif fno == 4:
            value = val
        elif fno == 5:
            value = _parse_tensor(val)[1]
        elif fno == 7:
            floats = _packed_floats(wt, val)
            value = floats if value is None else list(value) + floats
        elif fno == 8:
            ints = _packed_varints(wt, val)
            value = ints if value is None else list(value) + ints
        # field 20 (type) is redundant with which value field was set
    return name, value


@dataclass
class Node:
    op_type: str
    inputs: list[str]
    outputs: list[str]
    name: str = ""
    attrs: dict = field(default_factory=dict)


def _parse_node(data: bytes) -> Node:
    node = Node(op_type="", inputs=[], outputs=[])
    for fno, wt, val in _iter_fields(data):
        if fno == 1:
            node.inputs.append(val.decode("utf-8"))
        elif fno == 2:
            node.outputs.append(val.decode("utf-8"))
        elif fno == 3:
            node.name = val.decode("utf-8")
        elif fno == 4:
            node.op_type = val.decode("utf-8")
        elif fno == 5:
            k, v = _parse_attribute(val)
            node.attrs[k] = v
        elif fno == 7 and val:
            raise OnnxError(f"unsupported op domain {val.decode('utf-8')!r}")
    return node


def _parse_value_info(data: bytes) -> tuple[str, list[int | None]]:
    name = ""
    shape: list[int | None] = []
    for fno, _, val in _iter_fields(data):
        if fno == 1:
            name = val.decode("utf-8")
        elif fno == 2:
            for f2, _, v2 in _iter_fields(val):
                if f2 != 1:  # tensor_type
                    continue
                for f3, _, v3 in _iter_fields(v2):
                    if f3 != 2:  # shape
                        continue
                    for f4, _, v4 in _iter_fields(v3):
                        if f4 != 1:  # dim
                            continue
                        dim: int | None = None
                        for f5, w5, v5 in _iter_fields(v4):
                            if f5 == 1:
                                dim = _signed(v5)
                        shape.append(dim)
    return name, shape


@dataclass
class Graph:
    nodes: list[Node]
    initializers: dict[str, np.ndarray]
    inputs: dict[str, list[int | None]]
    outputs: dict[str, list[int | None]]


def _parse_graph(data: bytes) -> Graph:
    graph = Graph(nodes=[], initializers={}, inputs={}, outputs={})
    for fno, _, val in _iter_fields(data):
        if fno == 1:
            graph.nodes.append(_parse_node(val))
        elif fno == 5:
            name, arr = _parse_tensor(val)
            graph.initializers[name] = arr
        elif fno == 11:
            name, shape = _parse_value_info(val)
            graph.inputs[name] = shape
        elif fno == 12:
            name, shape = _parse_value_info(val)
            graph.outputs[name] = shape
    return graph


# --- operator kernels ------------------------------------------------------


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    pos = x >= 0
    out = np.empty_like(x)
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _pool_windows(x: np.ndarray, kernel, strides, pads, fill):
    kh, kw = kernel
    sh, sw = strides
    pt, pl, pb, pr = pads
    if pt or pl or pb or pr:
        x = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)), constant_values=fill)
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    return win[:, :, ::sh, ::sw]


def _op_conv(node: Node, x: np.ndarray, w: np.ndarray, b: np.ndarray | None):
    if node.attrs.get("group", 1) != 1:
        raise OnnxError("grouped Conv not supported")
    if any(d != 1 for d in node.attrs.get("dilations", [1, 1])):
        raise OnnxError("dilated Conv not supported")
    kernel = node.attrs.get("kernel_shape", list(w.shape[2:]))
    strides = node.attrs.get("strides", [1, 1])
    pads = node.attrs.get("pads", [0, 0, 0, 0])
    win = _pool_windows(x, kernel, strides, pads, 0.0)
    out = np.einsum("nchwij,mcij->nmhw", win, w, optimize=True)
    if b is not None:
        out = out + b.reshape(1, -1, 1, 1)
    return out.astype(x.dtype, copy=False)


def _op_maxpool(node: Node, x: np.ndarray):
    if node.attrs.get("ceil_mode", 0):
        raise OnnxError("MaxPool ceil_mode not supported")
    kernel = node.attrs["kernel_shape"]
    strides = node.attrs.get("strides", [1, 1])
    pads = node.attrs.get("pads", [0, 0, 0, 0])
    win = _pool_windows(x, kernel, strides, pads, -np.inf)
    return win.max(axis=(4, 5))


def _op_gemm(node: Node, a, b, c=None):
    if node.attrs.get("transA", 0):
        a = a.T
    if node.attrs.get("transB", 0):
        b = b.T
    out = node.attrs.get("alpha", 1.0) * (a @ b)
    if c is not None:
        out = out + node.attrs.get("beta", 1.0) * c
    return out.astype(a.dtype, copy=False)


def _op_reshape(node: Node, data: np.ndarray, shape: np.ndarray):
    target = []
    for i, d in enumerate(shape.astype(np.int64).tolist()):
        if d == 0 and not node.attrs.get("allowzero", 0):
            target.append(data.shape[i])
        else:
            target.append(int(d))
    return data.reshape(target)


def _op_batchnorm(node: Node, x, scale, bias, mean, var):
    eps = node.attrs.get("epsilon", 1e-5)
    shape = (1, -1) + (1,) * (x.ndim - 2)
    inv = 1.0 / np.sqrt(var + eps)
    return ((x - mean.reshape(shape)) * inv.reshape(shape)) * scale.reshape(shape) + bias.reshape(shape)


class OnnxModel:
    """A parsed ONNX model ready for numpy evaluation."""

    def __init__(self, graph: Graph, ir_version: int, opset: int):
        self.graph = graph
        self.ir_version = ir_version
        self.opset = opset
        # Graph inputs that are not initializers must come from the caller.
        self.input_names = [n for n in graph.inputs if n not in graph.initializers]
        self.output_names = list(graph.outputs)

    @classmethod
    def from_bytes(cls, data: bytes) -> "OnnxModel":
        graph = None
        ir_version = 0
        opset = 0
        try:
            for fno, wt, val in _iter_fields(data):
                if fno == 1 and wt == _WIRE_VARINT:
                    ir_version = _signed(val)
                elif fno == 7 and wt == _WIRE_LEN:
                    graph = _parse_graph(val)
                elif fno == 8 and wt == _WIRE_LEN:
                    for f2, w2, v2 in _iter_fields(val):
                        if f2 == 2:
                            opset = max(opset, _signed(v2))
        except OnnxError:
            raise
        except Exception as exc:
            raise OnnxError(f"not a parseable ONNX file: {exc}") from exc
        if graph is None:
            raise OnnxError("model has no graph")
        return cls(graph, ir_version, opset)

    @classmethod
    def load(cls, path) -> "OnnxModel":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())

    def input_shape(self, name: str) -> list[int | None]:
        return self.graph.inputs[name]

    def output_shape(self, name: str) -> list[int | None]:
        return self.graph.outputs[name]

    def run(self, feeds: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Evaluate the graph on the given inputs; returns all graph outputs."""
        missing = [n for n in self.input_names if n not in feeds]
        if missing:
            raise OnnxError(f"missing model inputs: {missing}")
        values: dict[str, np.ndarray] = dict(self.graph.initializers)
        values.update(feeds)
        for node in self.graph.nodes:
            args = [values[n] if n else None for n in node.inputs]
            for n in node.inputs:
                if n and n not in values:
                    raise OnnxError(f"node {node.name or node.op_type}: unknown input {n!r}")
            values[node.outputs[0]] = self._eval(node, args)
        try:
            return {n: values[n] for n in self.output_names}
        except KeyError as exc:
            raise OnnxError(f"graph output never produced: {exc}") from exc

    def _eval(self, node: Node, args: list):
        op = node.op_type
        if op == "Conv":
            return _op_conv(node, args[0], args[1], args[2] if len(args) > 2 else None)
        if op == "Relu":
            return np.maximum(args[0], 0)
        if op == "MaxPool":
            return _op_maxpool(node, args[0])
        if op == "GlobalAveragePool":
            return args[0].mean(axis=(2, 3), keepdims=True)
        if op == "GlobalMaxPool":
            return args[0].max(axis=(2, 3), keepdims=True)
        if op == "Flatten":
            axis = node.attrs.get("axis", 1)
            shape = args[0].shape
            axis = axis % (len(shape) + 1)
            lead = int(np.prod(shape[:axis])) if axis else 1
            return args[0].reshape(lead, -1)
        if op == "Reshape":
            return _op_reshape(node, args[0], args[1])
        if op == "Transpose":
            return np.transpose(args[0], node.attrs.get("perm"))
        if op == "Gemm":
            return _op_gemm(node, args[0], args[1], args[2] if len(args) > 2 else None)
        if op == "MatMul":
            return args[0] @ args[1]
        if op == "Add":
            return args[0] + args[1]
        if op == "Sigmoid":
            return _stable_sigmoid(args[0])
        if op == "BatchNormalization":
            return _op_batchnorm(node, *args[:5])
        if op == "Constant":
            return node.attrs["value"]
        if op in ("Identity", "Dropout"):
            return args[0]
        raise OnnxError(f"unsupported op {op}")
