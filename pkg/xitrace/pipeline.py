"""
XiTracePipeline - one run per CLI subcommand.

Builds the operator from the resolved configuration, performs the
computation and writes CSV/JSON results through `reports`.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from xitrace.config import DEFAULT_EPS_SCHEDULE, OUTPUT_DIR, THREADS
from xitrace.descriptors import (
    build_jacobi,
    build_potential,
    get_bool,
    get_float,
    get_int,
    get_list,
    get_section,
    is_jacobi,
)
from xitrace.errors import DescriptorError
from xitrace.experiments import ac_bound_experiment, almost_mathieu_spectrum, borg_demo
from xitrace.jacobi import (
    DirichletSite,
    heat_trace_difference,
    trace_formula_jacobi,
    truncate,
    xi_arg,
    xi_counting_function,
)
from xitrace.periodic import band_edges, dirichlet_mu, xi_periodic
from xitrace.reports import write_report, write_table
from xitrace.scattering import reflection_coefficient, xi_from_scattering
from xitrace.schrodinger import DirichletPoint, WholeLine, dirichlet_eigenvalues, xi_confining, xi_schrodinger
from xitrace.spectral import XiGrid
from xitrace.trace import absolutely_continuous_set, reconstruct_V, reconstruct_V_periodic, summability_profile

logger = logging.getLogger(__name__)

COMMANDS = ("xi", "trace", "bands", "scatter", "am", "borg")


class XiTracePipeline:
    """Main pipeline class that runs one spectral-shift computation."""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Initialize the pipeline with configuration.

        Args:
            config: Nested configuration dictionary (see _default_config)
        """
        self.config = config or self._default_config()
        self.outputs: List[str] = []

    @staticmethod
    def _default_config() -> Dict[str, Any]:
        """Return default configuration."""
        return {
            "operator": {"type": "schrodinger", "kind": "zero"},
            "point": {"x": "0", "n": "0"},
            "grid": {"lambda_min": "-1", "lambda_max": "5", "points": "61"},
            "numerics": {
                "eps_schedule": ",".join(str(e) for e in DEFAULT_EPS_SCHEDULE),
                "n_bands": "8",
                "n_max": "16",
                "band_method": "auto",
                "tail": "auto",
                "heat_alpha": "1.0",
            },
            "scatter": {"lambda_min": "0.5", "lambda_max": "100", "points": "40"},
            "am": {"coupling": "1", "p": "1", "q": "2", "count": "8", "window": "-4,4"},
            "borg": {"check_dirichlet": "false"},
            "output": {"dir": str(OUTPUT_DIR)},
        }

    # -- helpers -------------------------------------------------------------

    def _section(self, name: str) -> Dict[str, Any]:
        return get_section(self.config, name)

    @property
    def output_dir(self) -> str:
        return str(self._section("output").get("dir", OUTPUT_DIR))

    def _record(self, path) -> None:
        if path is not None:
            self.outputs.append(str(path))

    def _map(self, func: Callable, items: Sequence) -> List:
        """Ordered map over a sweep, threaded when XITRACE_THREADS > 1."""
        if THREADS > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=THREADS) as pool:
                return list(pool.map(func, items))
        return [func(item) for item in items]

    def _lambda_grid(self, section_name: str = "grid") -> np.ndarray:
        grid = self._section(section_name)
        lo, hi = get_float(grid, "lambda_min"), get_float(grid, "lambda_max")
        points = get_int(grid, "points")
        if points < 2 or hi <= lo:
            raise DescriptorError(f"{section_name} needs lambda_min < lambda_max and points >= 2")
        return np.linspace(lo, hi, points)

    def _eps_schedule(self) -> List[float]:
        eps = get_list(self._section("numerics"), "eps_schedule")
        if len(eps) < 2 or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise DescriptorError(f"numerics.eps_schedule must be positive and decreasing, got {eps}")
        return eps

    def _potential(self):
        return build_potential(self._section("operator"))

    def _x(self) -> float:
        return get_float(self._section("point"), "x", 0.0)

    def _n(self) -> int:
        return get_int(self._section("point"), "n", 0)

    def _jacobi_window(self, h) -> tuple:
        numerics = self._section("numerics")
        n = self._n()
        if "window" in numerics:
            a, b = (int(v) for v in get_list(numerics, "window"))
            return a, b
        if h.support is not None:
            return h.support
        return n - 20, n + 20

    # -- subcommands ---------------------------------------------------------

    def run_xi(self) -> Dict[str, Any]:
        """xi on a lambda grid via the boundary phase of the Green's function."""
        logger.info("Starting xi sweep...")
        lambdas = self._lambda_grid()
        eps = self._eps_schedule()
        if is_jacobi(self.config):
            h, n = build_jacobi(self._section("operator")), self._n()
            points = self._map(lambda lam: xi_arg(h, n, lam, eps), lambdas)
        else:
            V, x = self._potential(), self._x()
            points = self._map(lambda lam: xi_schrodinger(V, x, lam, eps), lambdas)
        records = [p.to_dict() for p in points]
        self._record(write_table(records, "xi", self.output_dir,
                                 columns=["lambda", "xi", "uncertainty", "converged"]))
        flagged = sum(not p.converged for p in points)
        logger.info(f"xi sweep completed. {len(points)} points, {flagged} flagged as jump points.")
        return {"points": len(points), "flagged": flagged}

    def _trace_jacobi(self) -> Dict[str, Any]:
        h, n = build_jacobi(self._section("operator")), self._n()
        try:
            t = truncate(h, self._jacobi_window(h))
        except ValueError as e:
            raise DescriptorError(str(e))
        site = DirichletSite(n)
        xi = xi_counting_function(t, site)
        value = trace_formula_jacobi(xi)
        alpha = get_float(self._section("numerics"), "heat_alpha", 1.0)
        direct, from_xi = heat_trace_difference(t, site, alpha)
        return {
            "value": value,
            "expected": h.v(n),
            "error": abs(value - h.v(n)),
            "window": list(t.window),
            "heat_trace": {"alpha": alpha, "eigenvalues": direct, "xi_integral": from_xi},
            "xi": xi.to_records(),
        }

    def _continuum_xi(self, V, x: float) -> XiGrid:
        numerics = self._section("numerics")
        if V.confining:
            count = get_int(numerics, "n_max") + 1
            E = dirichlet_eigenvalues(V, WholeLine(), count)
            mu = dirichlet_eigenvalues(V, DirichletPoint(x), count - 1)
            return xi_confining(V, x, E, mu)
        if V.is_periodic:
            bands = band_edges(V, get_int(numerics, "n_bands"), str(numerics.get("band_method", "auto")))
            mu = dirichlet_mu(V, x, bands.n_bands - 1, bands)
            return xi_periodic(bands, mu, x)
        lambdas = self._lambda_grid()
        eps = self._eps_schedule()
        points = self._map(lambda lam: xi_schrodinger(V, x, lam, eps), lambdas)
        return XiGrid.grid(x, lambdas, [p.value for p in points], [p.converged for p in points])

    def run_trace(self) -> Dict[str, Any]:
        """Reconstruct V(x) or v(n) from xi."""
        logger.info("Starting trace reconstruction...")
        if is_jacobi(self.config):
            payload = self._trace_jacobi()
        else:
            V, x = self._potential(), self._x()
            xi = self._continuum_xi(V, x)
            numerics = self._section("numerics")
            if "E0" in numerics:
                E0 = get_float(numerics, "E0")
            elif xi.is_piecewise and xi.jumps.size:
                E0 = float(xi.jumps[0])
            else:
                E0 = float(xi.coverage[0])
            result = reconstruct_V(xi, E0, tail=str(numerics.get("tail", "auto")))
            expected = float(V(x))
            payload = {
                "value": result.value,
                "expected": expected,
                "error": abs(result.value - expected),
                "trace": result.to_dict(),
                "ac_set": [list(iv) for iv in absolutely_continuous_set(xi)],
                "summability": summability_profile(xi, E0).to_records(),
                "xi": xi.to_records(),
            }
        self._record(write_report(payload, "trace", self.output_dir, self.config))
        logger.info(f"Trace reconstruction completed. value={payload['value']:.10g}")
        return {"value": payload["value"], "error": payload["error"]}

    def run_bands(self) -> Dict[str, Any]:
        """Band edges, mu_n(x) and gap-sum partial sums of a periodic potential."""
        logger.info("Starting band structure computation...")
        V, x = self._potential(), self._x()
        if not V.is_periodic:
            raise DescriptorError("bands needs a periodic potential (operator.kind = mathieu or operator.period)")
        numerics = self._section("numerics")
        bands = band_edges(V, get_int(numerics, "n_bands"), str(numerics.get("band_method", "auto")))
        mu = dirichlet_mu(V, x, bands.n_bands - 1, bands)
        periodic_trace = reconstruct_V_periodic(bands, mu, x)

        gaps = bands.gap_lengths
        records = []
        for k, (lower, upper) in enumerate(bands.bands):
            records.append({
                "band": k,
                "lower": lower,
                "upper": upper,
                "gap_above": gaps[k] if k < len(gaps) else None,
                "mu": mu[k] if k < len(mu) else None,
            })
        self._record(write_table(records, "bands", self.output_dir,
                                 columns=["band", "lower", "upper", "gap_above", "mu"]))
        payload = {
            "bands": bands.to_dict(),
            "mu": mu,
            "reconstruction": periodic_trace.to_dict(),
            "expected": float(V(x)),
        }
        self._record(write_report(payload, "bands", self.output_dir, self.config))
        logger.info(f"Band structure completed. {bands.n_bands} bands, V(x) ~ {periodic_trace.value:.10g}")
        return {"n_bands": bands.n_bands, "value": periodic_trace.value}

    def run_scatter(self) -> Dict[str, Any]:
        """Reflection coefficients and xi through scattering data."""
        logger.info("Starting scattering sweep...")
        V, x = self._potential(), self._x()
        lambdas = self._lambda_grid("scatter")
        if lambdas[0] <= 0:
            raise DescriptorError("scatter.lambda_min must be positive")

        def row(lam):
            data = reflection_coefficient(V, float(lam), x)
            xi = xi_from_scattering(data)
            bound = abs(data.R) / 2.0
            return {
                "lambda": data.lam,
                "R_abs": abs(data.R),
                "T_abs": abs(data.T),
                "xi": xi,
                "xi_bound": bound,
                "bound_ok": abs(xi - 0.5) <= bound + 1e-8,
                "unitarity_defect": data.unitarity_defect,
            }

        records = self._map(row, lambdas)
        self._record(write_table(records, "scatter", self.output_dir))
        violations = sum(not r["bound_ok"] for r in records)
        logger.info(f"Scattering sweep completed. {len(records)} energies, {violations} bound violations.")
        return {"points": len(records), "bound_violations": violations}

    def run_am(self) -> Dict[str, Any]:
        """Almost-Mathieu spectral measures."""
        logger.info("Starting almost-Mathieu computation...")
        am = self._section("am")
        coupling = get_float(am, "coupling")
        if "alpha" in am and str(am["alpha"]).strip():
            window = get_list(am, "window")
            if len(window) != 2:
                raise DescriptorError("am.window must be 'lo,hi'")
            report = ac_bound_experiment(coupling, get_float(am, "alpha"), window=(window[0], window[1]),
                                         count=get_int(am, "count"))
            records = report.rows
            self._record(write_report(report.to_dict(), "am", self.output_dir, self.config))
        else:
            try:
                spec = almost_mathieu_spectrum(coupling, get_int(am, "p"), get_int(am, "q"),
                                               get_float(am, "theta", 0.0))
            except ValueError as e:
                if isinstance(e, DescriptorError):
                    raise
                raise DescriptorError(str(e))
            records = [{"coupling": coupling, "p": spec.p, "q": spec.q, "alpha": spec.p / spec.q,
                        "measure": spec.measure, "bound": spec.bound, "bound_ok": spec.measure >= spec.bound - 1e-10}]
        self._record(write_table(records, "am", self.output_dir))
        logger.info(f"Almost-Mathieu computation completed. {len(records)} rows.")
        return {"rows": len(records), "min_measure": min(r["measure"] for r in records)}

    def run_borg(self) -> Dict[str, Any]:
        """Even-potential reconstruction of V(0) from eigenvalues."""
        logger.info("Starting even-potential demonstration...")
        V = self._potential()
        report = borg_demo(V, get_int(self._section("numerics"), "n_max"),
                           get_bool(self._section("borg"), "check_dirichlet"))
        self._record(write_report(report.to_dict(), "borg", self.output_dir, self.config))
        logger.info(f"Even-potential demonstration completed. error={report.error:.3e}")
        return {"value": report.reconstructed, "error": report.error}

    # -- orchestration -------------------------------------------------------

    def run(self, command: str) -> Dict[str, Any]:
        """
        Run one subcommand.

        Returns:
            Dictionary with execution results

        Raises:
            DescriptorError: If the command is unknown or the config invalid
            NumericalQualityError: If a computation fails its quality gate
        """
        handlers = {
            "xi": self.run_xi,
            "trace": self.run_trace,
            "bands": self.run_bands,
            "scatter": self.run_scatter,
            "am": self.run_am,
            "borg": self.run_borg,
        }
        if command not in handlers:
            raise DescriptorError(f"Unknown command '{command}'. Options: {', '.join(COMMANDS)}")

        logger.info("=" * 60)
        logger.info(f"Starting xitrace '{command}'")
        logger.info("=" * 60)
        start_time = datetime.now()
        results: Dict[str, Any] = {"status": "success", "command": command, "outputs": self.outputs}
        try:
            results["summary"] = handlers[command]()
            results["duration"] = str(datetime.now() - start_time)
            logger.info("=" * 60)
            logger.info(f"xitrace '{command}' completed successfully")
            logger.info(f"Duration: {results['duration']}")
            logger.info("=" * 60)
        except Exception as e:
            results["status"] = "failed"
            results["error"] = str(e)
            logger.error(f"xitrace '{command}' failed: {str(e)}")
            raise
        return results


def run_command(command: str, config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Run a single subcommand.

    Args:
        command: One of COMMANDS
        config: Pipeline configuration dictionary

    Returns:
        Dictionary with execution results
    """
    pipeline = XiTracePipeline(config)
    return pipeline.run(command)
