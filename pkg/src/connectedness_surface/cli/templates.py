"""Plain-text command summaries rendered with jinja2."""

from __future__ import annotations

from jinja2 import Template

ESTIMATE_SUMMARY = Template(
    """\
Estimated {{ count }} model(s) on {{ n }} assets (window {{ window }}, horizon {{ horizon }}).
{% for model in models -%}
window ending {{ model.window_end }}: TCI {{ "%.2f"|format(model.tci) }}
{% endfor -%}
{% if spillovers is not none -%}
{{ "%-16s %10s %10s %10s"|format("label", "to", "from", "net") }}
{% for label, row in spillovers.iterrows() -%}
{{ "%-16s %10.2f %10.2f %10.2f"|format(label, row["to"], row["from"], row["net"]) }}
{% endfor -%}
{% endif -%}
wrote {{ output }}
"""
)

SURFACE_SUMMARY = Template(
    """\
{{ kind }}: {{ rows }} x {{ columns }} cells ({{ "long-only" if long_only else "short sales allowed" }}), \
{{ infeasible }} infeasible
{% if degenerate is not none -%}
C = {{ "%.6g"|format(degenerate) }} * Sigma: lambda is redundant and the weights are constant.
{% endif -%}
{% for point in endpoints -%}
lambda = {{ point.lam }}{% if point.mu0 is not none %}, mu0 = {{ "%.6g"|format(point.mu0) }}{% endif %}: \
variance {{ "%.6g"|format(point.variance) }}, connectedness {{ "%.6g"|format(point.connectedness) }}
{% endfor -%}
wrote {{ csv_path }} and {{ json_path }}
"""
)

DECOMPOSE_SUMMARY = Template(
    """\
w*({{ lam }}) = {{ weights }}
alphas (MV, MC, max-mu) = {{ alphas }}
{{ "convex" if convex else "affine but not convex" }}{% if not representable %}, \
outside the span of the corner funds (residual {{ "%.3g"|format(residual) }}){% endif %}
"""
)

CHECK_REPORT = Template(
    """\
Trade-off identity (finite differences, h = {{ h }})
{{ "%8s %14s %14s %12s %12s"|format("lambda", "dsigma2", "dkappa", "residual", "slope err") }}
{% for row in tradeoff -%}
{{ "%8.3f %14.6g %14.6g %12.3g %12s"|format(row.lam, row.dsigma2, row.dkappa, row.identity_residual, \
row.slope_error) }}
{% endfor -%}
{% if analytic is none -%}
Analytic curves: skipped ({{ analytic_note }})
{% else -%}
Analytic curves: max identity residual {{ "%.3g"|format(analytic) }}
{% endif -%}
Envelope: max second difference {{ "%.3g"|format(envelope) }}
{% if scan is none -%}
Separation scan: skipped ({{ scan_note }})
{% elif scan.all_convex -%}
Separation scan: every optimum lies in the corner-fund hull
{% else -%}
Separation scan: negative alphas at lambda = {{ scan.violations|join(", ") }}
{% endif -%}
{% for violation in violations -%}
VIOLATION: {{ violation }}
{% endfor -%}
{{ "FAILED" if violations else "OK" }}
"""
)

__all__ = ["CHECK_REPORT", "DECOMPOSE_SUMMARY", "ESTIMATE_SUMMARY", "SURFACE_SUMMARY"]
