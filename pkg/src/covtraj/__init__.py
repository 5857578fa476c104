"""Joint trajectory and feedback-policy optimization under uncertainty.

Low-thrust interplanetary transfers with gravity assists, navigated by a
Kalman filter and steered output-feedback covariance control, solved by
sequential convexification with an embedded conic interior-point solver and
verified by nonlinear Monte Carlo.
"""

__version__ = "0.1.0"
