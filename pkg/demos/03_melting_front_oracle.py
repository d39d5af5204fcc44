"""Check the discretization against the closed-form melting front.

A bar initially at the phase temperature is melted from one wall held
above freezing.  The exact front position is X(t) = 2 lambda_s sqrt(a t)
with lambda_s from the transcendental Stefan relation; the simulated front
(the zero isotherm along the bar axis) should track it, and the error
should shrink as the mesh, the step and the smoothing band are refined
together.

The same study is available from the command line:
    simulate oracle neumann --cells 40 --tau 2000 --beta 1.0
"""

from cryoground.verify import neumann_convergence, neumann_lambda

for beta in (0.5, 1.0, 2.0):
    print(f"Stefan number {beta}: similarity constant lambda_s = {neumann_lambda(beta):.6f}")
print()

print("refining h, tau and the smoothing width together:")
print("level   cells   tau [s]   delta [degC]   max relative front error")
for level, report in enumerate(neumann_convergence(levels=3, cells=40, tau=2000.0, delta=0.1)):
    print(
        f"{level:5d}   {report.cells:5d}   {report.tau:7.0f}   "
        f"{report.delta:12.4f}   {report.max_rel_error:10.4f}"
    )
