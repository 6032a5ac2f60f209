use std::sync::OnceLock;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use eigenmeasure_core::cartan::{classify as classify_params, normalize_params, AmbientGroup, CartanType};
use eigenmeasure_core::cli::{classify_report, csv_table, verify_family};
use eigenmeasure_core::eigenspace::oracle_measure;
use eigenmeasure_core::measure::{
    closed_form_gl2, closed_form_nonsplit, closed_form_normalizer, closed_form_split, family_of_group, MeasureFamily,
};
use eigenmeasure_core::modarith::{is_square_unit as square_unit, rat_to_string, sqrt_hensel as hensel, Prime, Rat};
use eigenmeasure_core::problem::{AmbientSpec, MatrixInput, ProblemSpec};
use eigenmeasure_core::subgroup::{close, index_and_level, Budget, FiniteSubgroup, SubgroupSpec};
use eigenmeasure_core::Error;

create_exception!(eigenmeasure, EigenmeasureError, PyException);
create_exception!(eigenmeasure, SpecError, EigenmeasureError);
create_exception!(eigenmeasure, ResourceError, EigenmeasureError);

type VerifyRow<'py> = (u32, u32, Bound<'py, PyAny>, Bound<'py, PyAny>, bool);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Resource { .. } => ResourceError::new_err(e.to_string()),
        Error::Spec(_) | Error::InvalidRing(_) | Error::Domain(_) | Error::Precondition(_) | Error::Precision(_) => {
            SpecError::new_err(e.to_string())
        }
        _ => EigenmeasureError::new_err(e.to_string()),
    }
}

fn prime(ell: u64) -> PyResult<Prime> {
    Prime::new(ell).map_err(to_py)
}

fn fraction<'py>(py: Python<'py>, r: &Rat) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((rat_to_string(r),))
}

/// A measure family: finitely many cells covering N^2, each with a constant
/// `c` such that `mu_{a,b} = c * l^-(dim*a + b)` on the cell.
#[pyclass(frozen, module = "eigenmeasure")]
struct Family {
    inner: MeasureFamily,
}

#[pymethods]
impl Family {
    #[getter]
    fn ell(&self) -> u64 {
        self.inner.ell().get()
    }

    #[getter]
    fn dim(&self) -> u32 {
        self.inner.dim()
    }

    #[getter]
    fn law(&self) -> String {
        self.inner.law()
    }

    fn evaluate<'py>(&self, py: Python<'py>, a: u32, b: u32) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, &self.inner.evaluate(a, b).map_err(to_py)?)
    }

    fn total_mass<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        fraction(py, &self.inner.total_mass())
    }

    /// One dict per cell with keys `a_set`, `b_set`, `constant`, `provenance`.
    fn cells<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner
            .cells()
            .iter()
            .map(|c| {
                let d = PyDict::new(py);
                d.set_item("a_set", c.region.a_set.to_string())?;
                d.set_item("b_set", c.region.b_set.to_string())?;
                d.set_item("constant", fraction(py, &c.constant)?)?;
                d.set_item("provenance", &c.provenance)?;
                Ok(d)
            })
            .collect()
    }

    #[pyo3(signature = (a_max = 2, b_max = 2))]
    fn csv(&self, a_max: u32, b_max: u32) -> PyResult<String> {
        csv_table(&self.inner, a_max, b_max).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.cells().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Family(ell={}, cells={}, law={:?})",
            self.inner.ell(),
            self.inner.cells().len(),
            self.inner.law()
        )
    }
}

/// An open subgroup given by its ambient group, level and generators.
#[pyclass(frozen, module = "eigenmeasure")]
struct Subgroup {
    problem: ProblemSpec,
    spec: SubgroupSpec,
    budget: Budget,
    group: OnceLock<FiniteSubgroup>,
}

impl Subgroup {
    fn from_problem(problem: ProblemSpec) -> PyResult<Self> {
        let spec = problem.subgroup_spec().map_err(to_py)?;
        let budget = problem.budget();
        Ok(Subgroup {
            problem,
            spec,
            budget,
            group: OnceLock::new(),
        })
    }

    fn group(&self, py: Python<'_>) -> PyResult<&FiniteSubgroup> {
        if let Some(g) = self.group.get() {
            return Ok(g);
        }
        let g = py.detach(|| close(&self.spec, &self.budget)).map_err(to_py)?;
        Ok(self.group.get_or_init(|| g))
    }
}

#[pymethods]
impl Subgroup {
    /// `kind` is "gl2", "cartan" or "normalizer"; generators are 2x2 nested
    /// lists or flat row-major quadruples.
    #[new]
    #[pyo3(signature = (ell, kind = "gl2", c = 0, d = 0, level = None, generators = None, budget = None))]
    fn new(
        ell: u64,
        kind: &str,
        c: i64,
        d: i64,
        level: Option<u32>,
        generators: Option<Vec<Vec<Bound<'_, PyAny>>>>,
        budget: Option<u64>,
    ) -> PyResult<Self> {
        let ambient = match kind {
            "gl2" => AmbientSpec::Gl2,
            "cartan" => AmbientSpec::Cartan { c, d },
            "normalizer" => AmbientSpec::Normalizer { c, d },
            other => return Err(SpecError::new_err(format!("unknown ambient kind {other:?}"))),
        };
        let generators = generators
            .map(|gens| gens.iter().map(|g| matrix(g)).collect::<PyResult<Vec<_>>>())
            .transpose()?;
        Self::from_problem(ProblemSpec {
            ell,
            ambient,
            level,
            generators,
            budget,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::from_problem(ProblemSpec::from_json(text).map_err(to_py)?)
    }

    /// Canonical problem file: explicit level and reduced generators.
    fn to_json(&self) -> String {
        ProblemSpec::canonical(&self.spec, self.problem.budget).to_json()
    }

    #[getter]
    fn ell(&self) -> u64 {
        self.spec.ambient().ell().get()
    }

    #[getter]
    fn level(&self) -> u32 {
        self.spec.level()
    }

    #[getter]
    fn ambient(&self) -> String {
        self.spec.ambient().to_string()
    }

    /// Number of elements of `G` modulo `l^level`.
    fn order(&self, py: Python<'_>) -> PyResult<usize> {
        Ok(self.group(py)?.len())
    }

    fn index(&self, py: Python<'_>) -> PyResult<String> {
        Ok(index_and_level(self.group(py)?).map_err(to_py)?.0.to_string())
    }

    fn classify(&self) -> PyResult<String> {
        classify_report(&self.problem, &self.budget).map_err(to_py)
    }

    fn family(&self, py: Python<'_>) -> PyResult<Family> {
        let g = self.group(py)?;
        let budget = self.budget;
        let inner = py.detach(|| family_of_group(g, &budget)).map_err(to_py)?;
        Ok(Family { inner })
    }

    /// `mu_{a,b}` by brute-force counting at modulus `l^(a+b+1)`.
    fn oracle<'py>(&self, py: Python<'py>, a: u32, b: u32) -> PyResult<Bound<'py, PyAny>> {
        let g = self.group(py)?;
        let budget = self.budget;
        let mu = py.detach(|| oracle_measure(g, a, b, &budget)).map_err(to_py)?;
        fraction(py, &mu)
    }

    /// `(a, b, family value, oracle value, agree)` for every pair in range.
    #[pyo3(signature = (a_max = 2, b_max = 3))]
    fn verify<'py>(&self, py: Python<'py>, a_max: u32, b_max: u32) -> PyResult<Vec<VerifyRow<'py>>> {
        let g = self.group(py)?;
        let budget = self.budget;
        let rows = py
            .detach(|| family_of_group(g, &budget).and_then(|fam| verify_family(g, &fam, a_max, b_max, &budget)))
            .map_err(to_py)?;
        rows.iter()
            .map(|r| Ok((r.a, r.b, fraction(py, &r.family)?, fraction(py, &r.oracle)?, r.passed())))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Subgroup({}, level={}, generators={})",
            self.spec.ambient(),
            self.spec.level(),
            self.spec.generators().len()
        )
    }
}

fn matrix(g: &[Bound<'_, PyAny>]) -> PyResult<MatrixInput> {
    match g.len() {
        4 => Ok(MatrixInput::Flat([
            g[0].extract()?,
            g[1].extract()?,
            g[2].extract()?,
            g[3].extract()?,
        ])),
        2 => {
            let r0: [i64; 2] = g[0].extract()?;
            let r1: [i64; 2] = g[1].extract()?;
            Ok(MatrixInput::Rows([r0, r1]))
        }
        n => Err(SpecError::new_err(format!(
            "a generator has {n} entries; expected 2 rows or 4 entries"
        ))),
    }
}

/// Normal form and type of the quadratic ring with parameters `(c, d)`.
#[pyfunction]
fn classify<'py>(py: Python<'py>, c: i64, d: i64, ell: u64) -> PyResult<Bound<'py, PyDict>> {
    let ell = prime(ell)?;
    let p = normalize_params(c, d, ell).map_err(to_py)?;
    let tc = AmbientGroup::cartan(p, ell).tangent_cards();
    let out = PyDict::new(py);
    out.set_item("c", p.c())?;
    out.set_item("d", p.d())?;
    out.set_item("type", classify_params(&p, ell).to_string())?;
    out.set_item("tangent", (tc.t_all, tc.t_units, tc.t_sing_nonzero))?;
    Ok(out)
}

/// Family of a full group from the closed formulas: `kind` is one of
/// "gl2", "split", "nonsplit", "normalizer-split", "normalizer-nonsplit".
#[pyfunction]
fn closed_form(kind: &str, ell: u64) -> PyResult<Family> {
    let ell = prime(ell)?;
    let inner = match kind {
        "gl2" => closed_form_gl2(ell),
        "split" => closed_form_split(ell),
        "nonsplit" => closed_form_nonsplit(ell),
        "normalizer-split" => closed_form_normalizer(ell, CartanType::Split),
        "normalizer-nonsplit" => closed_form_normalizer(ell, CartanType::Nonsplit),
        other => return Err(SpecError::new_err(format!("unknown closed form {other:?}"))),
    }
    .map_err(to_py)?;
    Ok(Family { inner })
}

#[pyfunction]
fn is_square_unit(d: i64, ell: u64) -> PyResult<bool> {
    square_unit(d, prime(ell)?).map_err(to_py)
}

/// A square root of `d` in `Z_l`, modulo `l^(prec + v/2)` where `v` is the
/// valuation of `d`.
#[pyfunction]
fn sqrt_hensel(d: i64, ell: u64, prec: u32) -> PyResult<u64> {
    Ok(hensel(d, prime(ell)?, prec).map_err(to_py)?.value())
}

#[pymodule]
fn eigenmeasure(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<Family>()?;
    m.add_class::<Subgroup>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(is_square_unit, m)?)?;
    m.add_function(wrap_pyfunction!(sqrt_hensel, m)?)?;
    m.add("EigenmeasureError", py.get_type::<EigenmeasureError>())?;
    m.add("SpecError", py.get_type::<SpecError>())?;
    m.add("ResourceError", py.get_type::<ResourceError>())?;
    Ok(())
}
