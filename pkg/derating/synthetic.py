"""Generated benchmark family with a known derating profile.

Every chain is a gated shift register: stage k samples
``AND(Q[k-1], en_k)``, where ``en_k`` is an enable input shared by stage k of
all chains. The first stage samples ``din``. Chain ends are merged by an XOR
tree into the single output ``dout``, so an upset survives to the output
exactly when the enables of the remaining stages pass it along; derating
therefore falls off with distance from the chain end.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidParameterError


def generate_pipeline_netlist(chains: int = 25, depth: int = 8, seed: int = 0) -> str:
    """Netlist text with chains x depth flip-flops.

    The seed only permutes the order in which chain ends enter the XOR tree.
    """
    if chains < 1 or depth < 1:
        raise InvalidParameterError("Need at least one chain of at least one stage")

    enables = [f"en_{stage}" for stage in range(1, depth)]
    inputs = ["clk", "din", *enables]
    lines = [
        f"// {chains} gated shift-register chains of {depth} stages",
        f"module pipeline_{chains}x{depth} ({', '.join([*inputs, 'dout'])});",
        f"  input {', '.join(inputs)};",
        "  output dout;",
    ]

    ends = []
    for chain in range(chains):
        previous = "din"
        for stage in range(depth):
            q = f"q_{chain}_{stage}"
            if stage == 0:
                d = previous
            else:
                d = f"d_{chain}_{stage}"
                lines.append(
                    f"  AND2 g_{chain}_{stage} (.A({previous}), .B(en_{stage}), .Y({d}));"
                )
            lines.append(f"  DFF ff_{chain}_{stage} (.D({d}), .CLK(clk), .Q({q}));")
            previous = q
        ends.append(previous)

    order = np.random.default_rng(seed).permutation(len(ends))
    level = [ends[index] for index in order]
    gate = 0
    while len(level) > 1:
        merged = []
        for left, right in zip(level[::2], level[1::2]):
            net = f"x_{gate}"
            lines.append(f"  XOR2 gx_{gate} (.A({left}), .B({right}), .Y({net}));")
            merged.append(net)
            gate += 1
        if len(level) % 2:
            merged.append(level[-1])
        level = merged
    lines.append(f"  BUF g_out (.A({level[0]}), .Y(dout));")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"
