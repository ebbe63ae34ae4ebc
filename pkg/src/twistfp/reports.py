"""JSON reports (schema-validated) and CSV point data.

Reports use a versioned envelope {schema, kind, payload} validated against
the shipped JSON schema; artifacts are byte-deterministic: sorted keys, no
timestamps, and fixed 6-decimal formatting for bulk CSV coordinates.
"""

import json
from importlib import resources

import jsonschema

SCHEMA_ID = "twistfp-report-v1"

_schema_cache = None


def report_schema():
    global _schema_cache
    if _schema_cache is None:
        with resources.files("twistfp.schemas").joinpath(
                "report-v1.schema.json").open("r", encoding="utf-8") as fh:
            _schema_cache = json.load(fh)
    return _schema_cache


def make_report(kind, payload):
    report = {"schema": SCHEMA_ID, "kind": kind, "payload": payload}
    jsonschema.validate(report, report_schema())
    return report


def dumps_report(kind, payload):
    return json.dumps(make_report(kind, payload), sort_keys=True, indent=2) + "\n"


def write_report(kind, payload, path):
    data = dumps_report(kind, payload)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(data)
    return path


def _fmt(v):
    return f"{v:.6f}"


def write_orbit_csv(orbit, path):
    """Iterate data with header k,x,y."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,x,y\n")
        for k, (x, y) in enumerate(orbit.iterates):
            fh.write(f"{k},{_fmt(x)},{_fmt(y)}\n")
    return path


def write_trace_csv(rows, path):
    """Flow trace with header t,x,y; rows is an (n, 3) array."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x,y\n")
        for t, x, y in rows:
            fh.write(f"{_fmt(t)},{_fmt(x)},{_fmt(y)}\n")
    return path


def write_chart_csv(chart, path):
    """Chart radius profiles with header theta,r_inner,r_outer."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("theta,r_inner,r_outer\n")
        for th, ri, ro in zip(chart.thetas, chart.r_inner, chart.r_outer):
            fh.write(f"{_fmt(th)},{_fmt(ri)},{_fmt(ro)}\n")
    return path


def write_components_csv(inv, path):
    """Component vertices with header component_id,k,x,y,u."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("component_id,k,x,y,u\n")
        for comp in inv.components:
            for k, (x, y) in enumerate(comp.vertices):
                fh.write(f"{comp.id},{k},{_fmt(x)},{_fmt(y)},{comp.u_label}\n")
    return path
