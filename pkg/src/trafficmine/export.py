"""DOT, PNML and JSON serialization of workflow nets."""
from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from typing import Mapping, Optional

from .discovery import WorkflowNet
from .eventlog import SINK, SOURCE

# (upper bound on |f - 1|, colour)
STRENGTH_BANDS = ((0.25, "#2b8a3e"), (1.0, "#e67700"), (float("inf"), "#c92a2a"))


def strength_color(strength: float) -> str:
    for bound, color in STRENGTH_BANDS:
        if strength < bound:
            return color
    return STRENGTH_BANDS[-1][1]


def _node_ids(net: WorkflowNet) -> dict:
    ids = {}
    for k, p in enumerate(sorted(net.places)):
        ids[p] = f"p{k}"
    for k, t in enumerate(sorted(net.transitions)):
        ids[t.id] = f"t{k}"
    return ids


def _arc_pair(net: WorkflowNet, u: str, v: str) -> Optional[tuple]:
    """The dependency edge an arc was built from, if it can be told."""
    if u == net.source:
        return (SOURCE, net.label_of(v))
    if v == net.sink:
        return (net.label_of(u), SINK)
    place = v if u in net.transition_by_id else u
    pre = net.preset.get(place, ())
    post = net.postset.get(place, ())
    if len(pre) == 1 and len(post) == 1:
        return (net.label_of(next(iter(pre))), net.label_of(next(iter(post))))
    return None


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(net: WorkflowNet, annotations: Optional[Mapping[tuple, tuple]] = None) -> str:
    """Render transitions as labeled boxes and places as circles.

    ``annotations`` maps a label pair to ``(strength, synthetic)``; annotated
    arcs are coloured by strength band and synthetic ones drawn dashed.
    """
    annotations = annotations or {}
    ids = _node_ids(net)
    lines = ["digraph wfnet {", "  rankdir=LR;"]
    for p in sorted(net.places):
        label = p if p in (net.source, net.sink) else ""
        lines.append(f"  {ids[p]} [shape=circle, label={_quote(label)}];")
    for t in sorted(net.transitions):
        label = t.label if t.label is not None else "tau"
        style = ", style=filled, fillcolor=black" if t.label is None else ""
        lines.append(f"  {ids[t.id]} [shape=box, label={_quote(label)}{style}];")
    for u, v in sorted(net.arcs):
        attrs = []
        note = annotations.get(_arc_pair(net, u, v))
        if note is not None:
            strength, synthetic = note
            attrs.append(f"color={_quote(strength_color(strength))}")
            if synthetic:
                attrs.append("style=dashed")
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  {ids[u]} -> {ids[v]}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_pnml(net: WorkflowNet) -> str:
    ids = _node_ids(net)
    root = ET.Element("pnml")
    net_el = ET.SubElement(root, "net", id="wfnet",
                           type="http://www.pnml.org/version-2009/grammar/ptnet")
    page = ET.SubElement(net_el, "page", id="page0")

    def named(tag, node_id, name):
        el = ET.SubElement(page, tag, id=node_id)
        ET.SubElement(ET.SubElement(el, "name"), "text").text = name
        return el

    for p in sorted(net.places):
        named("place", ids[p], p)
    for t in sorted(net.transitions):
        named("transition", ids[t.id], t.label if t.label is not None else "tau")
    for k, (u, v) in enumerate(sorted(net.arcs)):
        ET.SubElement(page, "arc", id=f"a{k}", source=ids[u], target=ids[v])
    ET.indent(root)
    return ET.tostring(root, encoding="unicode", xml_declaration=True) + "\n"


def dumps_json(data) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
