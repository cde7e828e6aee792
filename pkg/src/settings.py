import os

from configobj import ConfigObj, ConfigObjError

from errors import WavegenError

THREADS_ENV_VAR = 'WAVEGEN_THREADS'


def read_flat_config(path):
    """
    Reads a flat `key = value` file

    Args:
        path (str | Path): file path

    Returns:
        dict: raw string (or list of strings) values keyed by option name
    """
    if not os.path.isfile(path):
        raise WavegenError(f'config file {path} does not exist')
    try:
        config = ConfigObj(str(path), file_error=True, list_values=True)
    except (ConfigObjError, OSError) as e:
        raise WavegenError(f'cannot parse config file {path}: {e}')
    sections = [key for key in config if isinstance(config[key], dict)]
    if sections:
        raise WavegenError(f'config file {path} must be flat, found sections {sections}')
    return {key.replace('-', '_'): config[key] for key in config}


def write_flat_config(path, values):
    """
    Writes a flat `key = value` file, lists become comma separated

    Args:
        path (str | Path): file path
        values (dict): option values
    """
    config = ConfigObj(list_values=True)
    config.filename = str(path)
    for key, value in values.items():
        if isinstance(value, (list, tuple)):
            config[key] = [str(v) for v in value]
        else:
            config[key] = str(value)
    config.write()


def merge_options(flags, config_values, defaults=None):
    """
    Resolves option values: flags win over config file values, which win over defaults

    Args:
        flags (dict): parsed command line values, None for flags not given
        config_values (dict): values read from a config file
        defaults (dict, optional): fallback values

    Returns:
        dict: merged values with None entries dropped
    """
    merged = dict(defaults or {})
    merged.update({k: v for k, v in config_values.items() if v is not None})
    merged.update({k: v for k, v in flags.items() if v is not None})
    return {k: v for k, v in merged.items() if v is not None}


def worker_count():
    """
    Number of joblib workers allowed by WAVEGEN_THREADS

    Returns:
        int: at least 1
    """
    raw = os.environ.get(THREADS_ENV_VAR, '1')
    try:
        return max(1, int(raw))
    except ValueError:
        raise WavegenError(f'{THREADS_ENV_VAR} must be an integer, got {raw!r}')
