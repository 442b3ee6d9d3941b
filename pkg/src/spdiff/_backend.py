"""Backend selection: compiled core when available, pure Python otherwise.

Set SPDIFF_FORCE_PYTHON=1 to force the fallback (used by the benchmark and
the backend-equivalence tests).
"""

import os

if os.environ.get("SPDIFF_FORCE_PYTHON") == "1":
    from . import _kernel_py as kernel
    COMPILED = False
else:
    try:
        from . import _kernel as kernel  # type: ignore[no-redef]
        COMPILED = True
    except ImportError:
        from . import _kernel_py as kernel  # type: ignore[no-redef]
        COMPILED = False


def backend_name() -> str:
    return "compiled" if COMPILED else "python"
