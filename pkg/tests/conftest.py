import pytest

import dense_oracle as D
from hybridnoise.clifford2 import GROUP_ORDER
from hybridnoise.tableau import StabilizerState


class Twin:
    """A stabilizer state and its dense density matrix driven by one event stream."""

    def __init__(self, n: int):
        self.n = n
        self.state = StabilizerState.zero_state(n)
        self.rho = D.density_matrix(self.state)

    def gate(self, g, a, b):
        self.state.apply_clifford2(g, a, b)
        self.rho = D.apply_two_qubit(self.rho, D.gate_unitary(g), a, b, self.n)

    def measure(self, site, coin):
        out_s = self.state.measure_z(site, coin)
        out_d, self.rho = D.measure_z(self.rho, site, coin, self.n)
        assert out_s == out_d
        return out_s

    def reset(self, site):
        self.state.reset(site)
        self.rho = D.reset(self.rho, site, self.n)

    def random_step(self, rng, kinds=("gate", "measure", "reset"), sites=None):
        sites = list(range(self.n)) if sites is None else list(sites)
        kind = kinds[rng.integers(len(kinds))]
        if kind == "gate":
            a, b = rng.choice(sites, size=2, replace=False)
            self.gate(int(rng.integers(GROUP_ORDER)), int(a), int(b))
        elif kind == "measure":
            self.measure(int(rng.choice(sites)), float(rng.random()))
        else:
            self.reset(int(rng.choice(sites)))
        return kind


@pytest.fixture
def twin_factory():
    return Twin


def random_state(n, steps, rng, kinds=("gate", "measure", "reset")) -> StabilizerState:
    """Random (generally mixed) stabilizer state from a random circuit, without the dense twin."""
    st = StabilizerState.zero_state(n)
    for _ in range(steps):
        kind = kinds[rng.integers(len(kinds))]
        if kind == "gate" and n >= 2:
            a, b = rng.choice(n, size=2, replace=False)
            st.apply_clifford2(int(rng.integers(GROUP_ORDER)), int(a), int(b))
        elif kind == "measure":
            st.measure_z(int(rng.integers(n)), float(rng.random()))
        elif kind == "reset":
            st.reset(int(rng.integers(n)))
    return st


# acceptance summary -----------------------------------------------------------------

def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion; printed in the terminal summary."""
    lines = request.config._acceptance_lines

    def record(number: int, passed: bool, detail: str) -> bool:
        lines.append((number, f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines, key=lambda t: t[0]):
            terminalreporter.write_line(line)
