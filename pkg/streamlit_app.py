import streamlit as st
from utils.dashboard.handlers import action_validate_config, action_pn_rollout, action_case_labels
from utils.sidebar.navigation import navigate
from utils.sidebar.helper import selected_config_path
from utils.page_config import set_custom_page_config
from utils.log_config import configure_logging

# --------------------------------------------------------------------------
# Initialize session state
# --------------------------------------------------------------------------
if "logging_ready" not in st.session_state:
	configure_logging("INFO")
	st.session_state.logging_ready = True

# --------------------------------------------------------------------------
# Streamlit Page Config
# --------------------------------------------------------------------------

# Use with default page title
set_custom_page_config()

# --------------------------------------------------------------------------
# Navigation on side bar
# --------------------------------------------------------------------------
navigate()

# --------------------------------------------------------------------------
# Main Page Content
# --------------------------------------------------------------------------
st.markdown("###### Terminal-phase guidance for a hypersonic glide vehicle: 3-DOF engagement simulation, recurrent policy training and Monte Carlo evaluation.")
st.markdown("###### Pick a run config on the side bar. Long training runs belong on the command line (`python cli.py train ...`); this dashboard inspects their outputs.")
# --------------------------------------------------------------------------
# Buttons (calls a function)
# --------------------------------------------------------------------------
col1, col2, col3 = st.columns([1, 1, 1])

# Dictionary: button name => action function
button_actions = {
	"validate_config": lambda: action_validate_config(selected_config_path()),
	"pn_rollout": lambda: action_pn_rollout(selected_config_path()),
	"case_labels": action_case_labels,
}

with col1:
	if st.button("Validate Config", use_container_width=True):
		st.session_state["active_button"] = "validate_config"

with col2:
	if st.button("Run PN Rollout", use_container_width=True):
		st.session_state["active_button"] = "pn_rollout"

with col3:
	if st.button("Case Labels", use_container_width=True):
		st.session_state["active_button"] = "case_labels"

# --------------------------------------------------------------------------
# Execute the active button's action
# --------------------------------------------------------------------------
active_button = st.session_state.get("active_button")
if active_button:
	action_fn = button_actions.get(active_button)
	if action_fn:
		action_fn()
	else:
		st.warning("No action mapped for this button.")
