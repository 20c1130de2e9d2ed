from pathlib import Path

import numpy as np
import pytest

from tokompiler.bpe_baseline import train_bpe
from tokompiler.models import SourceUnit

CORPUS_ROOT = Path(__file__).parent / "data" / "corpus"

ARRAY_DECL_SOURCE = "int main() { int r[2800 + 1]; }\n"

_WORDS = (
    "update flux grid cell boundary halo exchange solver stencil residual "
    "tracer density pressure velocity interior ghost layer sweep kernel "
    "buffer scale reduce partial sum across ranks before after each step"
).split()

_C_TEMPLATES = (
    """/* {comment} */
static double {f}(const double *{a}, double *{b}, int {n})
{{
    /* {note} */
    double {acc} = {x1};
    int {i};
    for ({i} = 0; {i} < {n}; {i}++) {{
        {b}[{i}] = {a}[{i}] * {x2} + {acc};
        {acc} += {a}[{i}];
    }}
    if ({acc} > {k1}) {{
        {acc} = {acc} / {n};
    }}
    return {acc};
}}
""",
    """/* {comment} */
void {f}(int {n}, double {b}[], const double {a}[])
{{
    /* {note} */
    int {i};
    for ({i} = 1; {i} < {n} - 1; {i}++) {{
        {b}[{i}] = {x1} * ({a}[{i} - 1] + {a}[{i} + 1]) - {x2} * {a}[{i}];
    }}
    {b}[0] = {b}[{n} - 1];
    printf("{word}: %f\\n", {b}[{k1}]);
}}
""",
)

_CPP_TEMPLATES = (
    """// {comment}
template <typename T>
T {f}(const std::vector<T> &{a}, T {acc})
{{
    // {note}
    for (std::size_t {i} = 0; {i} < {a}.size(); ++{i}) {{
        {acc} += {a}[{i}] * {acc};
    }}
    return {acc} + {a}[{k1}];
}}
""",
    """// {comment}
double {f}(std::vector<double> &{b}, double {x})
{{
    // {note}
    double {acc} = {x1};
    for (std::size_t {i} = 0; {i} < {b}.size(); ++{i}) {{
        {b}[{i}] = {b}[{i}] * {x} + {x2};
        {acc} = std::max({acc}, {b}[{i}]);
    }}
    return {acc} * {k1};
}}
""",
)

_FORTRAN_TEMPLATES = (
    """! {comment}
subroutine {f}({n}, {a}, {b}, {x})
  implicit none
  ! {note}
  integer, intent(in) :: {n}
  real, dimension({n}), intent(in) :: {a}
  real, dimension({n}), intent(inout) :: {b}
  real, intent(in) :: {x}
  integer :: {i}
  do {i} = 1, {n}
    {b}({i}) = {x} * {a}({i}) + {b}({i}) * {x1}
  end do
  if ({x} > {x2}) then
    {b}({k1}) = {b}({k1}) - {x}
  end if
end subroutine {f}
""",
    """! {comment}
function {f}({n}, {a}) result({acc})
  implicit none
  ! {note}
  integer, intent(in) :: {n}
  real, dimension({n}), intent(in) :: {a}
  real :: {acc}
  integer :: {i}
  {acc} = {x1}
  do {i} = 1, {n}
    {acc} = {acc} + {a}({i}) * {a}({i})
  end do
  {acc} = sqrt({acc}) * {x2}
end function {f}
""",
)

_TEMPLATES = {
    "c": (".c", _C_TEMPLATES, "#include <stdio.h>\n\n"),
    "cpp": (".cpp", _CPP_TEMPLATES, "#include <algorithm>\n#include <vector>\n\n"),
    "fortran": (".f90", _FORTRAN_TEMPLATES, ""),
}


def _name(rng: np.random.Generator) -> str:
    letters = "".join(rng.choice(list("abcdefghijklmnopqrstuvwxyz"), size=int(rng.integers(3, 8))))
    return f"{letters}{int(rng.integers(0, 100))}"


def _fields(rng: np.random.Generator) -> dict:
    names = set()
    while len(names) < 7:
        names.add(_name(rng))
    f, a, b, n, i, acc, x = sorted(names)
    return dict(
        f=f,
        a=a,
        b=b,
        n=n,
        i=i,
        acc=acc,
        x=x,
        x1=f"{rng.integers(1, 99)}.{rng.integers(0, 9)}",
        x2=f"0.{rng.integers(1, 999)}",
        k1=str(int(rng.integers(1, 9))),
        word=str(rng.choice(_WORDS)),
        comment=" ".join(rng.choice(_WORDS, size=int(rng.integers(6, 14)))),
        note=" ".join(rng.choice(_WORDS, size=int(rng.integers(8, 16)))),
    )


def write_synthetic_corpus(root: Path, files_per_language: int = 70, functions_per_file: int = 5, seed: int = 7) -> int:
    """Seeded C/C++/Fortran tree under `root`; returns the number of functions written."""
    rng = np.random.default_rng(seed)
    functions = 0
    for language, (suffix, templates, prelude) in _TEMPLATES.items():
        for file_index in range(files_per_language):
            repo = f"repo{file_index % 7}"
            bodies = []
            for _ in range(functions_per_file):
                template = templates[int(rng.integers(0, len(templates)))]
                bodies.append(template.format(**_fields(rng)))
            path = root / repo / language / f"kernels{file_index}{suffix}"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(prelude + "\n".join(bodies), encoding="utf-8")
            functions += functions_per_file
    return functions


@pytest.fixture
def corpus_root() -> Path:
    return CORPUS_ROOT


@pytest.fixture(scope="session")
def synthetic_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("synthetic")
    write_synthetic_corpus(root)
    return root


@pytest.fixture
def array_decl_unit() -> SourceUnit:
    return SourceUnit(id="array_decl.c", language="c", origin="array_decl.c", text=ARRAY_DECL_SOURCE)


@pytest.fixture(scope="session")
def synthetic_bpe(synthetic_root):
    """BPE trained the way `compare` trains it: 5% of the files, target 50,000."""
    texts = [path.read_text(encoding="utf-8") for path in sorted(synthetic_root.rglob("*.*")) if path.is_file()]
    return train_bpe(texts, target_size=50_000, sample_fraction=0.05, seed=2)
