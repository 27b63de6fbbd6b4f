#!/usr/bin/env python3
"""Regenerates the example documents under crates/edgeplan/data/."""

import math
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates" / "edgeplan" / "data"

BYTES_PER_PARAM = 2  # fp16 weights
TRAIN_BYTES_PER_PARAM = 16  # weights, grads, optimizer state
SEQ = 512

# name: (effective TFLOPS, active W, idle W, comm W, memory GiB)
DEVICES = {
    "rtx4060ti": (10.0, 160.0, 18.0, 4.0, 16),
    "rtx4050m": (6.0, 60.0, 8.0, 3.0, 6),
    "mi15": (1.0, 6.0, 0.8, 1.2, 6),
    "s25": (1.2, 6.5, 0.8, 1.2, 6),
    "m720": (0.30, 35.0, 9.0, 2.0, 16),
    "m520": (0.20, 25.0, 7.0, 2.0, 8),
    "a40": (60.0, 300.0, 30.0, 10.0, 48),
    "v100": (40.0, 250.0, 25.0, 10.0, 32),
}

GIB = 1 << 30


def fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, str):
        return '"' + x + '"'
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        r = repr(x)
        return r if ("." in r or "e" in r) else r + ".0"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(fmt(v) for v in x) + "]"
    return str(x)


def table_array(name, rows):
    out = []
    for row in rows:
        out.append(f"[[{name}]]")
        for k, v in row.items():
            if isinstance(v, dict):
                continue
            out.append(f"{k} = {fmt(v)}")
        for k, v in row.items():
            if isinstance(v, dict):
                out.append(f"[{name}.{k}]")
                for kk, vv in v.items():
                    out.append(f"{kk} = {fmt(vv)}")
        out.append("")
    return out


def write(path, lines):
    path.write_text("\n".join(lines).rstrip() + "\n")


# ---- models ----


def transformer(hidden=1024, blocks=28, vocab=32000):
    """Embedding, `blocks` decoder blocks and an output head: 30 nodes."""
    act = SEQ * hidden * BYTES_PER_PARAM
    nodes = [("embed", vocab * hidden, act)]
    nodes += [(f"block{i:02}", 12 * hidden * hidden, act) for i in range(blocks)]
    nodes += [("head", vocab * hidden, SEQ * 4)]
    edges = [(nodes[i][0], nodes[i + 1][0]) for i in range(len(nodes) - 1)]
    return nodes, edges


def multimodal(hidden=768):
    """Image and text encoders feeding a fusion trunk."""
    act = SEQ * hidden * BYTES_PER_PARAM
    nodes = [("patch_embed", 3 * 16 * 16 * hidden, 196 * hidden * 2)]
    nodes += [(f"vis{i}", 12 * hidden * hidden, 196 * hidden * 2) for i in range(6)]
    nodes += [("tok_embed", 32000 * hidden, act)]
    nodes += [(f"txt{i}", 12 * hidden * hidden, act) for i in range(8)]
    nodes += [("fuse", 4 * hidden * hidden, act)]
    nodes += [(f"dec{i}", 12 * hidden * hidden, act) for i in range(4)]
    nodes += [("mm_head", 32000 * hidden, SEQ * 4)]
    edges = []
    vis = ["patch_embed"] + [f"vis{i}" for i in range(6)]
    txt = ["tok_embed"] + [f"txt{i}" for i in range(8)]
    dec = ["fuse"] + [f"dec{i}" for i in range(4)] + ["mm_head"]
    for chain in (vis, txt, dec):
        edges += list(zip(chain, chain[1:]))
    edges += [(vis[-1], "fuse"), (txt[-1], "fuse")]
    return nodes, edges


def model_doc(name, nodes, edges):
    lines = ['schema = "edgeplan.model/1"', f"name = {fmt(name)}", "edges = ["]
    lines += [f"    [{fmt(a)}, {fmt(b)}]," for a, b in edges]
    lines += ["]", ""]
    lines += table_array(
        "nodes",
        [{"id": n, "param_bytes": p * BYTES_PER_PARAM, "activation_bytes": a} for n, p, a in nodes],
    )
    return lines


# ---- environments ----


def profile_rows(nodes, devices):
    rows = []
    for layer, params, act in nodes:
        flops = 2.0 * params * SEQ  # forward, one sample
        for dev_id, kind in devices:
            tflops, watts, _, _, _ = DEVICES[kind]
            fwd = flops / (tflops * 1e12)
            rows.append(
                {
                    "layer": layer,
                    "device": dev_id,
                    "fwd_s": round(fwd, 9),
                    "bwd_s": round(2 * fwd, 9),
                    "fwd_j": round(watts * fwd, 9),
                    "bwd_j": round(watts * 2 * fwd, 9),
                    "mem_bytes": params * TRAIN_BYTES_PER_PARAM + 4 * act,
                }
            )
    return rows


def device_rows(devices, tp=None):
    rows = []
    for dev_id, kind in devices:
        _, _, idle, comm, mem = DEVICES[kind]
        row = {"id": dev_id, "memory_bytes": mem * GIB, "idle_power_w": idle, "comm_power_w": comm}
        if tp and dev_id in tp:
            row["tensor_parallel"] = tp[dev_id]
        rows.append(row)
    return rows


def wifi(devices, bps, domain="wifi"):
    ids = [d for d, _ in devices]
    pairs = [(a, b) for a in ids for b in ids if a != b]
    links = [{"src": a, "dst": b, "peak_bps": bps} for a, b in pairs]
    domains = [{"id": domain, "capacity_bps": bps, "members": [list(p) for p in pairs]}]
    return domains, links


def ring(devices, bps):
    """Full-duplex ring; a non-adjacent pair is charged to its first clockwise hop."""
    ids = [d for d, _ in devices]
    n = len(ids)
    hops = {}
    for i in range(n):
        for step in (1, -1):
            a, b = ids[i], ids[(i + step) % n]
            hops[(a, b)] = {"id": f"ring:{a}->{b}", "capacity_bps": bps, "members": []}
    links = []
    for i, a in enumerate(ids):
        for j, b in enumerate(ids):
            if a == b:
                continue
            if (a, b) in hops:
                first = (a, b)
            else:
                first = (a, ids[(i + 1) % n])
            hops[first]["members"].append([a, b])
            links.append({"src": a, "dst": b, "peak_bps": bps})
    domains = [h for h in hops.values() if h["members"]]
    return domains, links


def env_doc(name, devices, net, nodes, tp=None):
    domains, links = net
    lines = ['schema = "edgeplan.env/1"', f"name = {fmt(name)}", ""]
    lines += table_array("devices", device_rows(devices, tp))
    for d in domains:
        lines.append("[[domains]]")
        lines.append(f"id = {fmt(d['id'])}")
        lines.append(f"capacity_bps = {fmt(float(d['capacity_bps']))}")
        lines.append("members = [")
        lines += [f"    [{fmt(a)}, {fmt(b)}]," for a, b in d["members"]]
        lines += ["]", ""]
    lines += table_array("links", [{**l, "peak_bps": float(l["peak_bps"])} for l in links])
    lines += table_array("profile", profile_rows(nodes, devices))
    return lines


SETTINGS = {
    "smart-home-1": (
        [("desk-4060ti-a", "rtx4060ti"), ("desk-4060ti-b", "rtx4060ti"),
         ("laptop-4050-a", "rtx4050m"), ("laptop-4050-b", "rtx4050m"), ("laptop-4050-c", "rtx4050m")],
        lambda d: wifi(d, 900e6),
        None,
    ),
    "smart-home-2": (
        [("laptop-4050-a", "rtx4050m"), ("laptop-4050-b", "rtx4050m"),
         ("phone-mi15-a", "mi15"), ("phone-mi15-b", "mi15"), ("phone-s25", "s25")],
        lambda d: wifi(d, 600e6),
        None,
    ),
    "traffic-monitor": (
        [("m720-a", "m720"), ("m720-b", "m720"), ("m520-a", "m520"), ("m520-b", "m520")],
        lambda d: ring(d, 200e6),
        None,
    ),
    "edge-cluster": (
        [("a40-a", "a40"), ("a40-b", "a40"), ("v100-a", "v100"), ("v100-b", "v100")],
        lambda d: ring(d, 4e9),
        {"a40-a": {"degree": 2, "speedup": 1.8, "mem_divisor": 2.0},
         "a40-b": {"degree": 2, "speedup": 1.8, "mem_divisor": 2.0}},
    ),
}


def qoe_doc(t_qoe, lam, mb, units, delta=0.0):
    return [
        'schema = "edgeplan.qoe/1"',
        f"t_qoe_s = {fmt(float(t_qoe))}",
        f"lambda = {fmt(float(lam))}",
        f"microbatches = {mb}",
        f"units_per_microbatch = {units}",
        f"merge_delta = {fmt(float(delta))}",
    ]


def trace_doc(events):
    lines = ['schema = "edgeplan.trace/1"', ""]
    return lines + table_array("events", events)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    tf_nodes, tf_edges = transformer()
    mm_nodes, mm_edges = multimodal()
    write(OUT / "transformer-30.model.toml", model_doc("transformer-30", tf_nodes, tf_edges))
    write(OUT / "multimodal.model.toml", model_doc("multimodal", mm_nodes, mm_edges))
    all_nodes = tf_nodes + [n for n in mm_nodes if n[0] not in {t[0] for t in tf_nodes}]
    for name, (devices, net, tp) in SETTINGS.items():
        write(OUT / f"{name}.env.toml", env_doc(name, devices, net(devices), all_nodes, tp))
    write(OUT / "training.qoe.toml", qoe_doc(60.0, 0.5, 8, 4))
    write(OUT / "interactive.qoe.toml", qoe_doc(2.0, 50.0, 4, 1, 0.01))
    write(
        OUT / "smart-home-2.trace.toml",
        trace_doc(
            [
                {"kind": "bw_change", "t_s": 0.5, "domain": "wifi", "capacity_bps": 570e6},
                {"kind": "compute_scale", "t_s": 1.0, "device": "phone-s25", "factor": 0.6},
                {"kind": "bw_change", "t_s": 2.0, "domain": "wifi", "capacity_bps": 300e6},
            ]
        ),
    )
    write(
        OUT / "traffic-monitor.trace.toml",
        trace_doc(
            [
                {"kind": "compute_scale", "t_s": 5.0, "device": "m520-b", "factor": 0.95},
                {"kind": "bw_change", "t_s": 20.0, "domain": "ring:m720-a->m720-b", "capacity_bps": 100e6},
            ]
        ),
    )


if __name__ == "__main__":
    main()
