import logging
from pathlib import Path

import streamlit as st

logger = logging.getLogger(__name__)

CONFIG_DIR = Path("configs")
DEFAULTS_LABEL = "<built-in defaults>"

# Config files offered in the sidebar; the secrets file may point at one more
def config_choices():
    logger.debug("config_choices() called")
    choices = [DEFAULTS_LABEL] + sorted(str(p) for p in CONFIG_DIR.glob("*.toml"))
    try:
        preferred = st.secrets.get("HSW_CONFIG_PATH")
    except FileNotFoundError:
        preferred = None
    if preferred:
        if preferred in choices:
            choices.remove(preferred)
        choices.insert(0, preferred)
    return choices

# Config path for the library, None for the built-in defaults
def selected_config_path():
    path = st.session_state.get("config_path")
    return None if path in (None, DEFAULTS_LABEL) else path

# Clear the session state
def clear_session_state():
    logger.debug("clear_session_state() called")
    for key in list(st.session_state.keys()):
        del st.session_state[key]
    st.cache_data.clear()
    st.rerun()
