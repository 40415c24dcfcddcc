import os


class Settings:
    # Application Settings
    APP_NAME: str = "levy-blowup"
    LOG_LEVEL: str = os.environ.get("LEVY_BLOWUP_LOG_LEVEL", "INFO")

    # Config Schema
    SCHEMA_VERSION: int = 1
    CONFIG_HASH_LENGTH: int = 16

    # Scheme Defaults (physics parameters alpha, beta, m, u0 never default)
    DEFAULT_DT: float = 1e-3
    DEFAULT_BLOWUP_THRESHOLD: float = 1e8 # Per-path L2 threshold for blow-up detection.
    DEFAULT_MAX_HALVINGS: int = 30
    STABILITY_FACTOR: float = 0.5 # dt * beta * |u|_inf^(m-1) must stay below this.

    # Ensemble Defaults
    DEFAULT_PATHS: int = 200
    DEFAULT_MASTER_SEED: int = 20240607
    DEFAULT_RECORD_STRIDE: int = 1
    DEFAULT_MS_THRESHOLD: float = 1e6 # Mean-square detection threshold on E|u|^2.
    CONFIDENCE_Z: float = 1.96

    # Oracle Settings
    BALANCE_SE_FACTOR: float = 3.0
    BALANCE_DT_CONSTANT: float = 50.0 # Calibrated once on the linear sine preset (gradient balance gap about 24 dt).
    BALANCE_WINDOW_FRACTION: float = 1e-2 # Balances use times with norms below this fraction of theta.
    MARTINGALE_SE_FACTOR: float = 4.0
    TAYLOR_SCAN_POINTS: int = 1025
    TAYLOR_RELATIVE_RESIDUAL: float = 1e-10

    # Quadrature Settings
    LEVY_QUAD_RELTOL: float = 1e-10
    TIME_QUAD_RELTOL: float = 1e-8
    TIME_QUAD_MAX_LEVEL: int = 20


settings = Settings()
