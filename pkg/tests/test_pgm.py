"""Tests for thermo.pgm."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import logsumexp

from thermo.alphabet import enumerate_words
from thermo.errors import (
    CapExceeded,
    ConfigError,
    DepthUnsupported,
    LowESS,
    Unsupported,
)
from thermo.observables import angle_correlation, constant, cylinder_indicator, site_value
from thermo.pgm import (
    ConvergenceRow,
    assess_convergence,
    convergence_test,
    exact_pgm,
    hamiltonian,
    hubbard_stratonovich_check,
    limit_mixture,
    mc_pgm,
)
from thermo.quadratic import find_maxima
from thermo.xy import bessel_ratio, xy_critical_point, xy_phi


def _magnetization(beta: float) -> float:
    m = 1.0
    for _ in range(100_000):
        m = 0.5 * (m + math.tanh(beta * m))
    return m


def _brute_force(pf, n, beta, observable):
    """Value and log Z by summing over every admissible word."""
    words = enumerate_words(pf.transition, n).as_array()
    log_w = np.log(pf.alphabet.weights)[words].sum(axis=1)
    energies = np.array([hamiltonian(pf.psi, pf.alphabet.values[w]) for w in words])
    log_terms = log_w - beta * energies
    log_z = logsumexp(log_terms)
    f = observable(pf.alphabet.values[words[:, : observable.depth]])
    return float(f @ np.exp(log_terms - log_z)), float(log_z)


def _radial_field_average(beta: float, n: int) -> tuple[float, float]:
    """E[cos(theta_0 - theta_1)] under the circle PGM and log int_0^inf r e^{n phi(r)} dr, by quadrature."""
    shift = n * max(0.0, xy_critical_point(beta).phi_max)

    def density(r):
        return r * math.exp(n * xy_phi(beta, r)[0] - shift)

    upper = 3.0
    mass, _ = quad(density, 0.0, upper, limit=200, epsabs=0.0, epsrel=1e-12)
    moment, _ = quad(lambda r: density(r) * bessel_ratio(beta * r) ** 2, 0.0, upper, limit=200, epsabs=0.0, epsrel=1e-12)
    return moment / mass, shift + math.log(mass)


class TestHamiltonian:
    """Tests for hamiltonian."""

    def test_aligned_word(self, curie_weiss):
        """Four +1 spins give H = -16/8 = -2."""
        assert hamiltonian(curie_weiss.psi, [0.0, 0.0, 0.0, 0.0]) == -2.0

    def test_balanced_word(self, curie_weiss):
        """Alternating spins have S = 0."""
        assert hamiltonian(curie_weiss.psi, [0.0, 1.0, 0.0, 1.0]) == 0.0

    def test_depth_two_wraps(self, depth_two):
        """Depth-2 windows close periodically: 0,0,1 gives pairs (0,0), (0,1), (1,0)."""
        # S = 0.5 - 0.5 - 0.5 = -0.5
        assert hamiltonian(depth_two.psi, [0.0, 0.0, 1.0]) == pytest.approx(-0.25 / 6, abs=1e-15)

    def test_rejects_empty_word(self, curie_weiss):
        """n = 0 has no Hamiltonian."""
        with pytest.raises(ConfigError):
            hamiltonian(curie_weiss.psi, [])


class TestExactPgm:
    """Tests for exact_pgm."""

    @pytest.mark.parametrize("n", [3, 8, 12])
    def test_matches_brute_force_on_full_shift(self, curie_weiss, n):
        """Type counting equals summation over 2^n words."""
        observable = cylinder_indicator(curie_weiss.alphabet, [1, 1])

        estimate = exact_pgm(curie_weiss, n, 1.3, observable)
        value, log_z = _brute_force(curie_weiss, n, 1.3, observable)

        assert estimate.value == pytest.approx(value, abs=1e-12)
        assert estimate.log_z == pytest.approx(log_z, abs=1e-11)
        assert estimate.method == "exact"

    @pytest.mark.parametrize("n", [2, 7, 12])
    def test_matches_brute_force_on_golden_mean(self, golden_mean, n):
        """The constrained dynamic program equals summation over admissible words."""
        observable = cylinder_indicator(golden_mean.alphabet, [1])

        estimate = exact_pgm(golden_mean, n, 2.0, observable)
        value, log_z = _brute_force(golden_mean, n, 2.0, observable)

        assert estimate.value == pytest.approx(value, abs=1e-12)
        assert estimate.log_z == pytest.approx(log_z, abs=1e-11)

    def test_three_symbols(self, classical_cwp):
        """Three-symbol counting equals brute force."""
        observable = cylinder_indicator(classical_cwp.alphabet, [2])

        estimate = exact_pgm(classical_cwp, 7, 3.0, observable)
        value, _ = _brute_force(classical_cwp, 7, 3.0, observable)

        assert estimate.value == pytest.approx(value, abs=1e-12)

    def test_odd_observable_vanishes(self, curie_weiss):
        """omega_0 has mean exactly 0 by spin-flip symmetry."""
        estimate = exact_pgm(curie_weiss, 101, 2.0, site_value(curie_weiss.alphabet))

        assert estimate.value == 0.0

    def test_zero_beta_is_product(self, curie_weiss):
        """At beta = 0 the PGM is rho^n."""
        observable = cylinder_indicator(curie_weiss.alphabet, [1, -1])

        estimate = exact_pgm(curie_weiss, 50, 0.0, observable)

        assert estimate.value == pytest.approx(0.25, abs=1e-13)
        assert estimate.log_z == pytest.approx(0.0, abs=1e-12)

    def test_constant_observable(self, classical_cwp):
        """A constant has expectation equal to itself."""
        assert exact_pgm(classical_cwp, 20, 2.0, constant(3.0)).value == pytest.approx(3.0, abs=1e-13)

    def test_circle_is_unsupported(self, xy):
        """Exact counting needs a finite alphabet."""
        with pytest.raises(Unsupported):
            exact_pgm(xy, 10, 1.0, angle_correlation())

    def test_depth_two_is_unsupported(self, depth_two):
        """Type counting only covers depth-1 potentials."""
        with pytest.raises(DepthUnsupported):
            exact_pgm(depth_two, 10, 1.0, constant())

    def test_cap_exceeded(self, classical_cwp):
        """Too many count vectors raise CapExceeded."""
        with pytest.raises(CapExceeded):
            exact_pgm(classical_cwp, 100, 1.0, constant(), cap=100)

    def test_constrained_table_cap(self, golden_mean):
        """The DP table is bounded by the same cap."""
        with pytest.raises(CapExceeded):
            exact_pgm(golden_mean, 100, 1.0, constant(), cap=50)

    def test_observable_longer_than_word(self, curie_weiss):
        """Observable depth may not exceed n."""
        with pytest.raises(ConfigError):
            exact_pgm(curie_weiss, 1, 1.0, cylinder_indicator(curie_weiss.alphabet, [1, 1]))

    @pytest.mark.parametrize("model", ["curie_weiss", "classical_cwp"])
    @pytest.mark.parametrize("n", [10, 40])
    def test_partition_function_grows_with_beta(self, request, model, n):
        """On a full shift Z_n >= 1 and log Z_n is non-decreasing in beta."""
        pf = request.getfixturevalue(model)
        betas = np.linspace(0.0, 3.0, 13)

        log_z = np.array([exact_pgm(pf, n, beta, constant()).log_z for beta in betas])

        assert np.all(log_z >= -1e-12)
        assert np.all(np.diff(log_z) >= -1e-12)


class TestMcPgm:
    """Tests for mc_pgm."""

    def test_product_proposal_matches_exact(self, curie_weiss):
        """Importance sampling from rho^n agrees with counting within 4 stderr."""
        observable = cylinder_indicator(curie_weiss.alphabet, [1, 1])
        exact = exact_pgm(curie_weiss, 50, 0.3, observable)

        estimate = mc_pgm(curie_weiss, 50, 0.3, observable, samples=20_000, seed=7)

        assert estimate.method == "mc"
        assert estimate.proposal == "product"
        assert abs(estimate.value - exact.value) < 4 * estimate.stderr + 1e-3
        assert estimate.log_z == pytest.approx(exact.log_z, abs=0.02)

    def test_field_proposal_matches_exact(self, curie_weiss):
        """Sampling the auxiliary field reaches the low-temperature phase."""
        observable = cylinder_indicator(curie_weiss.alphabet, [1, 1])
        exact = exact_pgm(curie_weiss, 200, 2.0, observable)

        estimate = mc_pgm(curie_weiss, 200, 2.0, observable, samples=20_000, seed=3, proposal="hubbard-stratonovich")

        assert estimate.ess > 10_000
        assert abs(estimate.value - exact.value) < 4 * estimate.stderr + 1e-3
        assert estimate.log_z == pytest.approx(exact.log_z, abs=0.02)

    @pytest.mark.parametrize(("n", "beta", "samples"), [(20, 4.0, 400_000), (50, 1.0, 1_000_000)])
    def test_radial_field_matches_quadrature(self, xy, n, beta, samples):
        """On the circle the field has density 2 pi r e^{n phi(r)} dr; value and log Z match quadrature."""
        observable = angle_correlation()
        value, log_integral = _radial_field_average(beta, n)

        estimate = mc_pgm(xy, n, beta, observable, samples=samples, seed=17, proposal="hubbard-stratonovich")

        assert abs(estimate.value - value) < 4 * estimate.stderr + 1e-4
        assert estimate.log_z == pytest.approx(math.log(n * beta) + log_integral, abs=0.01)

    def test_random_configurations_match_exact(self, curie_weiss, classical_cwp):
        """20 random (model, n <= 60, beta <= 1) draws agree with counting within 4 stderr."""
        rng = np.random.default_rng(2024)
        for k in range(20):
            n = int(rng.integers(5, 61))
            beta = float(rng.uniform(0.05, 1.0))
            if k % 2:
                pf = curie_weiss
                proposal = "hubbard-stratonovich" if beta >= 0.3 else "product"
                observable = cylinder_indicator(pf.alphabet, [1, 1])
            else:
                pf, proposal = classical_cwp, "product"
                observable = cylinder_indicator(pf.alphabet, [1])
            exact = exact_pgm(pf, n, beta, observable)

            estimate = mc_pgm(pf, n, beta, observable, samples=20_000, seed=k, proposal=proposal)

            assert abs(estimate.value - exact.value) < 4 * estimate.stderr + 1e-3, (n, beta, proposal)

    def test_same_seed_same_result(self, curie_weiss):
        """Batches are seeded independently of the thread count."""
        observable = site_value(curie_weiss.alphabet)

        single = mc_pgm(curie_weiss, 30, 1.0, observable, samples=12_000, seed=11, batch_size=5_000)
        threaded = mc_pgm(curie_weiss, 30, 1.0, observable, samples=12_000, seed=11, batch_size=5_000, threads=3)

        assert single == threaded

    def test_zero_beta_falls_back_to_product(self, curie_weiss):
        """The field proposal is degenerate at beta = 0."""
        estimate = mc_pgm(curie_weiss, 10, 0.0, constant(), samples=500, seed=1, proposal="hubbard-stratonovich")

        assert estimate.proposal == "product"
        assert estimate.value == pytest.approx(1.0)

    def test_low_effective_sample_size(self, curie_weiss):
        """Collapsed weights raise LowESS carrying the ESS."""
        with pytest.raises(LowESS) as excinfo:
            mc_pgm(curie_weiss, 400, 4.0, constant(), samples=200, seed=0, min_ess=150)

        assert excinfo.value.ess < 150

    def test_constrained_transition_is_unsupported(self, golden_mean):
        """Sampling from rho^n needs A identically 1."""
        with pytest.raises(Unsupported):
            mc_pgm(golden_mean, 10, 1.0, constant(), samples=100, seed=0)

    def test_field_proposal_needs_small_q(self, classical_cwp):
        """The field proposal covers q = 1 and the circle only."""
        with pytest.raises(Unsupported):
            mc_pgm(classical_cwp, 10, 1.0, constant(), samples=100, seed=0, proposal="hubbard-stratonovich")

    def test_unknown_proposal(self, curie_weiss):
        """Unknown proposal names are config errors."""
        with pytest.raises(ConfigError):
            mc_pgm(curie_weiss, 10, 1.0, constant(), samples=100, seed=0, proposal="metropolis")


class TestHubbardStratonovichCheck:
    """Tests for hubbard_stratonovich_check."""

    @pytest.mark.parametrize("xi", [[0.0], [1.0], [-2.0], [1.2, -0.9], [0.0, 2.0], [1.4, 1.4]])
    def test_identity_holds(self, xi):
        """64 nodes per dimension reproduce e^{|xi|^2} to 1e-10."""
        assert hubbard_stratonovich_check(xi, 64) < 1e-10

    def test_three_dimensions(self):
        """q = 3 with a small xi and 16 nodes per dimension."""
        assert hubbard_stratonovich_check([0.3, -0.2, 0.4], 16) < 1e-10

    def test_full_tensor_grid(self):
        """The largest grid, 128^3 nodes, at |xi| near 2.7."""
        assert hubbard_stratonovich_check([1.5, -1.0, 2.0], 128) < 1e-10

    @pytest.mark.parametrize(
        ("xi", "nodes"),
        [([0.1, 0.1, 0.1, 0.1], 8), ([6.0], 64), ([1.0], 129)],
    )
    def test_guards(self, xi, nodes):
        """q above 3, |xi| above 5 or too many nodes are refused."""
        with pytest.raises(ConfigError):
            hubbard_stratonovich_check(xi, nodes)


class TestLimitMixture:
    """Tests for limit_mixture."""

    def test_single_maximum(self, curie_weiss):
        """High temperature has one component of weight 1 at z = 0."""
        mixture = limit_mixture(curie_weiss, 0.5)

        assert len(mixture.components) == 1
        assert mixture.components[0].weight == 1.0
        assert mixture.components[0].z[0] == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_pair(self, curie_weiss):
        """beta = 2 gives +-m with weight 1/2 each."""
        mixture = limit_mixture(curie_weiss, 2.0)

        np.testing.assert_allclose(mixture.weights, [0.5, 0.5], atol=1e-9)

    def test_prediction_for_aligned_pair(self, curie_weiss):
        """The mixture puts mass (1 + m^2)/4 on the cylinder [+1, +1]."""
        m = _magnetization(2.0)
        observable = cylinder_indicator(curie_weiss.alphabet, [1, 1])

        prediction = limit_mixture(curie_weiss, 2.0).expectation(curie_weiss, observable)

        assert prediction == pytest.approx((1 + m * m) / 4, abs=1e-8)

    def test_three_state_weights(self, classical_cwp):
        """Three symmetric maxima share the mass equally."""
        mixture = limit_mixture(classical_cwp, 4.0)

        np.testing.assert_allclose(mixture.weights, 1 / 3, atol=1e-6)

    def test_constrained_single_maximum(self, golden_mean):
        """A lone maximizer gets weight 1 even when A is constrained."""
        mixture = limit_mixture(golden_mean, 1.0)

        assert mixture.weights.tolist() == [1.0]
        assert mixture.expectation(golden_mean, constant()) == pytest.approx(1.0, abs=1e-13)

    def test_circle_of_maximizers(self, xy):
        """A radial circle of maximizers has no finite mixture."""
        maxima = find_maxima(xy, 4.0, radial=True)

        with pytest.raises(Unsupported):
            limit_mixture(xy, 4.0, maxima)

    def test_to_dict(self, curie_weiss):
        """Components serialize with their eigenmeasures."""
        payload = limit_mixture(curie_weiss, 2.0).to_dict()

        assert payload["beta"] == 2.0
        assert len(payload["components"][0]["nu"]) == 2


class TestAssessConvergence:
    """Tests for assess_convergence."""

    @staticmethod
    def _rows(gaps, stderr=None):
        return [ConvergenceRow(n=10 * (i + 1), value=g, prediction=0.0, gap=g, stderr=stderr) for i, g in enumerate(gaps)]

    def test_decreasing_gaps_pass(self):
        """Non-increasing gaps ending below the tolerance pass."""
        assert assess_convergence(self._rows([0.3, 0.05, 0.02, 0.01]), 0.02)

    def test_increase_fails(self):
        """A growing gap fails without sampling error."""
        assert not assess_convergence(self._rows([0.05, 0.01, 0.015]), 0.02)

    def test_final_gap_above_tolerance(self):
        """Trend alone is not enough."""
        assert not assess_convergence(self._rows([0.3, 0.2, 0.1]), 0.02)

    def test_stderr_slack(self):
        """Increases within twice the summed stderr are tolerated."""
        assert assess_convergence(self._rows([0.012, 0.010, 0.011], stderr=0.001), 0.02)


class TestConvergenceTest:
    """Tests for convergence_test."""

    def test_plus_minus_pair_converges(self, curie_weiss):
        """Exact values at n = 100, 400, 1600 approach (p+^2 + p-^2)/2 with final gap < 0.02."""
        observable = cylinder_indicator(curie_weiss.alphabet, [1, 1])

        table = convergence_test(curie_weiss, 2.0, observable, [100, 400, 1600])

        gaps = [row.gap for row in table.rows]
        assert table.passed
        assert gaps[0] >= gaps[1] >= gaps[2]
        assert gaps[2] < 0.02
        assert [row.n for row in table.rows] == [100, 400, 1600]

    def test_unknown_method(self, curie_weiss):
        """Only exact and mc are known."""
        with pytest.raises(ConfigError):
            convergence_test(curie_weiss, 0.5, constant(), [10, 20, 30], method="quadrature")
