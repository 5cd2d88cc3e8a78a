use super::Factor;

/// Index bookkeeping for addressing a subset of factors.
///
/// For every flat index `i` of the full space, `sel[i]` is the index within
/// the selected factors (in selection order, first most significant) and
/// `rest[i]` the index within the remaining factors (canonical order).
pub(crate) struct Split {
    pub sel_dim: usize,
    pub rest_dim: usize,
    pub sel: Vec<usize>,
    pub rest: Vec<usize>,
}

impl Split {
    pub fn new(factors: &[Factor], selected: &[usize]) -> Split {
        let k = factors.len();
        let dims: Vec<usize> = factors.iter().map(|f| f.dim).collect();
        let mut is_sel = vec![false; k];
        for &p in selected {
            is_sel[p] = true;
        }

        let mut sel_stride = vec![0usize; k];
        let mut sel_dim = 1;
        for &p in selected.iter().rev() {
            sel_stride[p] = sel_dim;
            sel_dim *= dims[p];
        }
        let mut rest_stride = vec![0usize; k];
        let mut rest_dim = 1;
        for p in (0..k).rev() {
            if !is_sel[p] {
                rest_stride[p] = rest_dim;
                rest_dim *= dims[p];
            }
        }

        let total = sel_dim * rest_dim;
        let mut sel = Vec::with_capacity(total);
        let mut rest = Vec::with_capacity(total);
        let mut digits = vec![0usize; k];
        let (mut s, mut r) = (0usize, 0usize);
        for _ in 0..total {
            sel.push(s);
            rest.push(r);
            // odometer, last factor fastest
            for p in (0..k).rev() {
                digits[p] += 1;
                s += sel_stride[p];
                r += rest_stride[p];
                if digits[p] < dims[p] {
                    break;
                }
                s -= dims[p] * sel_stride[p];
                r -= dims[p] * rest_stride[p];
                digits[p] = 0;
            }
        }
        Split {
            sel_dim,
            rest_dim,
            sel,
            rest,
        }
    }
}
