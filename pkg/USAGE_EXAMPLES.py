"""
Example Usage Scenarios for the Orthotropic p-Laplace MCP Server

This file shows how an LLM agent would drive the solver and the estimate
checks through the MCP tools.
"""

# =============================================================================
# SCENARIO 1: Discover what can be solved
# =============================================================================
"""
User: "Which test problems does the solver know about?"

Agent Action:
1. Calls tool: list_scenarios()
2. Reads resource: orthotropic://defaults

Agent Response:
"Four scenario names are available:
- affine: 3 x1 - 2 x2 + 1, reproduced exactly for every p and eps
- ustar: |x1|^p' - |x2|^p', an exact solution of the degenerate equation
- oscillatory: sin(2 pi x1) + cos(2 pi x2)/2, no closed form
- standard: affine, ustar at p = 1.2, 1.5, 1.8, and oscillatory

Runs default to p = 1.5, a 6-level eps ladder from 1e-2, grids n = 65 and 129
on [-1, 1]^2, and the estimate ball R = 0.8."
"""

# =============================================================================
# SCENARIO 2: Solve one problem
# =============================================================================
"""
User: "Solve the u* problem for p = 1.2 on a 65 x 65 grid."

Agent Action:
1. Calls tool: solve(scenario="ustar", p=1.2, n=[65], out="runs")

Agent Response:
"Solved all 6 eps levels (1e-2 down to 9.8e-6). Each level converged; the
snapshots are under runs/ustar-p1.2/65/<eps>/field.txt with a solve.json
report beside each, and runs/ustar-p1.2/65/ladder.json records the
differences between consecutive levels."
"""

# =============================================================================
# SCENARIO 3: Run the estimate checks
# =============================================================================
"""
User: "Do the regularity estimates hold numerically for the oscillatory data?"

Agent Action:
1. Calls tool: verify(scenario="oscillatory", n=[65, 129], out="runs")
2. Reads "status", "exit_code" and "message" from the reply, then for each
   entry of "scenarios" looks up the reports named in its "failed" list

Agent Response (the verdicts come from the reply, not from this script):
"The run finished with exit code <0 or 2>. The reply covers:
- minimality against 100 random competitors
- the Lebesgue oscillation bound for both derivatives
- the max/min principle on 5 nested balls, with the radial-bump negative
  control expected to fail
- measured constants for the oscillation decay, the Lipschitz bound and the
  second-derivative bounds, compared between n = 65 and n = 129 and between
  the two smallest eps levels
- the decrease of the eps ladder differences

<For each failed report: its name, lhs, rhs and the context entries that
explain it, e.g. the per-member values of a stability check.>

The oscillatory data has no closed form, so no exact-error checks apply.
Details are in runs/oscillatory/reports.json and summary.csv."
"""

# =============================================================================
# SCENARIO 4: Tabulate constants across exponents
# =============================================================================
"""
User: "How does the oscillation constant depend on p?"

Agent Action:
1. Calls tool: sweep(scenario="ustar", n=[65], sweep={"p": [1.2, 1.5, 1.8]})

Agent Response:
"runs/sweep.csv now holds one row per check, p, eps, n and radius. Reading
the theorem rows for the smallest eps gives the measured oscillation constant
for each exponent: <one value per p from the csv>."
"""

# =============================================================================
# SCENARIO 5: Check the scalar monotonicity inequality
# =============================================================================
"""
User: "Is the regularized flux strictly monotone for p = 1.1?"

Agent Action:
1. Calls tool: monotonicity_sweep(p=1.1, eps=[0, 0.1, 1])

Agent Response:
"Yes. On a 401 x 401 sample of [-10, 10]^2 the flux difference times (a - b)
is positive off the diagonal for every eps, and the largest ratio of the
weighted square to it changes by less than 5% when the sample is refined."
"""
