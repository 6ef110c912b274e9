"""Operation counts and complexity reduction ratios for the configurations discussed in the docs."""
from lpcb.complexity import ComplexityParams, crr

CASES = [
    ("A_{4,2} 150% vs non-LP M=4", ComplexityParams(2, 3, 2, 6, 1), ComplexityParams(4, 3, 2, 6, 4), False),
    ("A_{8,3} 150% vs GAM M=8", ComplexityParams(3, 3, 2, 6, 2), ComplexityParams(8, 3, 2, 6, 6), False),
    ("A_{16,4} 150% vs M=16 (inferred I_t=7)", ComplexityParams(4, 3, 2, 6, 4),
     ComplexityParams(16, 3, 2, 6, 7), True),
]


def main():
    for label, lp, base, inferred in CASES:
        r = crr(lp, base, inferred)
        flag = " [baseline inferred]" if inferred else ""
        print(f"{label:<40} N_m {r.n_mult:>9} / {r.baseline_mult:>9}  CRR_mult {100 * r.crr_mult:6.2f}%  "
              f"CRR_add {100 * r.crr_add:6.2f}%{flag}")


if __name__ == "__main__":
    main()
