"""
Configuration Manager for the SRBM product-form toolkit
Handles numerical tolerances, simulation settings and named profiles
"""

import copy
from dataclasses import asdict, dataclass, fields, replace
import json
import os
from pathlib import Path
from typing import Dict, Any, Optional
import logging

DEFAULT_CONFIG_DIR = Path(__file__).resolve().parent / "config"


class ConfigManager:
    def __init__(self, config_dir: Optional[str] = None):
        self.config_dir = str(config_dir) if config_dir else str(DEFAULT_CONFIG_DIR)
        self.config_file = os.path.join(self.config_dir, "settings.json")
        self.profiles_file = os.path.join(self.config_dir, "profiles.json")

        # Default configuration
        self.default_config = {
            "tolerances": {
                "singular": 1e-12,
                "minor": 1e-10,
                "s_matrix": 1e-9,
                "symmetry": 1e-8,
                "pivot": 1e-12,
                "membership": 1e-9,
                "degenerate": 1e-10,
                "tangency": 1e-9,
                "stability": 1e-10,
                "marginal_band": 1e-8,
                "verdict": 1e-8,
                "lcp": 1e-10
            },
            "simulation": {
                "step": 1e-3,
                "horizon": 2e4,
                "burn_in": 2e3,
                "seed": 20240601,
                "batches": 20,
                "replications": 1,
                "workers": 1,
                "block_steps": 65536,
                "boundary_bridge": True,
                "max_retries": 3,
                "dump_every": 100
            },
            "empirical_test": {
                "rate_tolerance": 0.05,
                "ci_multiplier": 3.0,
                "correlation_tolerance": 0.05
            },
            "plot": {
                "samples": 360,
                "margin": 0.1,
                "width_inches": 6.0,
                "height_inches": 6.0
            },
            "logging": {
                "level": "INFO",
                "file": None
            },
            "performance": {
                "max_memory_mb": 2048
            }
        }

        self.base_config = self.load_config()
        self.current_config = copy.deepcopy(self.base_config)
        self.profiles = self.load_profiles()
        self.current_profile = "default"

    def load_config(self) -> Dict[str, Any]:
        """Load settings.json merged over the defaults"""
        try:
            if os.path.exists(self.config_file):
                with open(self.config_file, 'r') as f:
                    config = json.load(f)
                # Merge with defaults to ensure all keys exist
                return self._merge_configs(self.default_config, config)
            return copy.deepcopy(self.default_config)
        except Exception as e:
            logging.error(f"Error loading config: {e}")
            return copy.deepcopy(self.default_config)

    def save_config(self, config: Optional[Dict[str, Any]] = None) -> bool:
        """Save configuration to file"""
        try:
            config_to_save = config or self.current_config
            os.makedirs(self.config_dir, exist_ok=True)
            with open(self.config_file, 'w') as f:
                json.dump(config_to_save, f, indent=4)
            return True
        except Exception as e:
            logging.error(f"Error saving config: {e}")
            return False

    def load_profiles(self) -> Dict[str, Dict[str, Any]]:
        """Load named profiles; each profile holds overrides of the base settings"""
        try:
            if os.path.exists(self.profiles_file):
                with open(self.profiles_file, 'r') as f:
                    return json.load(f)
            return {
                "default": {},
                "quick": self._create_quick_profile(),
                "fine": self._create_fine_profile(),
                "strict": self._create_strict_profile()
            }
        except Exception as e:
            logging.error(f"Error loading profiles: {e}")
            return {"default": {}}

    def save_profiles(self, profiles: Optional[Dict[str, Dict[str, Any]]] = None) -> bool:
        """Save profiles to file"""
        try:
            profiles_to_save = profiles or self.profiles
            os.makedirs(self.config_dir, exist_ok=True)
            with open(self.profiles_file, 'w') as f:
                json.dump(profiles_to_save, f, indent=4)
            return True
        except Exception as e:
            logging.error(f"Error saving profiles: {e}")
            return False

    def get_setting(self, category: str, key: str, default: Any = None) -> Any:
        """Get a specific setting value"""
        try:
            return self.current_config.get(category, {}).get(key, default)
        except Exception:
            return default

    def set_setting(self, category: str, key: str, value: Any, persist: bool = False) -> bool:
        """Set a specific setting value, optionally writing settings.json"""
        try:
            if category not in self.current_config:
                self.current_config[category] = {}
            self.current_config[category][key] = value
            return self.save_config() if persist else True
        except Exception as e:
            logging.error(f"Error setting config value: {e}")
            return False

    def get_section(self, category: str) -> Dict[str, Any]:
        """Get all settings in a category/section"""
        try:
            return copy.deepcopy(self.current_config.get(category, {}))
        except Exception:
            return {}

    def switch_profile(self, profile_name: str) -> bool:
        """Switch to a named profile"""
        if profile_name in self.profiles:
            self.current_profile = profile_name
            self.current_config = self._merge_configs(self.base_config, self.profiles[profile_name])
            logging.debug(f"Switched to profile '{profile_name}'")
            return True
        logging.error(f"Unknown profile: {profile_name}")
        return False

    def create_profile(self, name: str, config: Optional[Dict[str, Any]] = None) -> bool:
        """Create a new profile and persist the profile table"""
        try:
            profile_config = config if config is not None else copy.deepcopy(self.current_config)
            self.profiles[name] = profile_config
            return self.save_profiles()
        except Exception as e:
            logging.error(f"Error creating profile: {e}")
            return False

    def _merge_configs(self, default: Dict[str, Any], user: Dict[str, Any]) -> Dict[str, Any]:
        """Recursively merge user config with defaults"""
        result = copy.deepcopy(default)
        for key, value in user.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_configs(result[key], value)
            else:
                result[key] = copy.deepcopy(value)
        return result

    def _create_quick_profile(self) -> Dict[str, Any]:
        """Short simulation horizon for smoke runs"""
        return {"simulation": {"horizon": 2e3, "burn_in": 2e2, "batches": 10}}

    def _create_fine_profile(self) -> Dict[str, Any]:
        """Finer time step"""
        return {"simulation": {"step": 2.5e-4}}

    def _create_strict_profile(self) -> Dict[str, Any]:
        """Tighter verdict tolerance"""
        return {"tolerances": {"verdict": 1e-10, "symmetry": 1e-10}}


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by the library modules"""
    singular: float = 1e-12
    minor: float = 1e-10
    s_matrix: float = 1e-9
    symmetry: float = 1e-8
    pivot: float = 1e-12
    membership: float = 1e-9
    degenerate: float = 1e-10
    tangency: float = 1e-9
    stability: float = 1e-10
    marginal_band: float = 1e-8
    verdict: float = 1e-8
    lcp: float = 1e-10

    @classmethod
    def from_config(cls, config: "ConfigManager") -> "Tolerances":
        known = {f.name for f in fields(cls)}
        section = config.get_section("tolerances")
        return cls(**{k: float(v) for k, v in section.items() if k in known})

    def with_verdict(self, tol: float) -> "Tolerances":
        """Override the relative verdict tolerance (the CLI --tol flag)"""
        return replace(self, verdict=float(tol), symmetry=float(tol))

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()
