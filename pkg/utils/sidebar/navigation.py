import logging

import streamlit as st

from utils.sidebar.helper import clear_session_state, config_choices

logger = logging.getLogger(__name__)

# This function is used to set up the sidebar navigation for the Streamlit app.
# It links the workflow pages and holds the run-config selector shared by every page.
def navigate():
	logger.debug("navigate() called")

	choices = config_choices()
	current = st.session_state.get("config_path")
	index = choices.index(current) if current in choices else 0
	st.session_state.config_path = st.sidebar.selectbox("Run config", choices, index=index, key="config_selector")

	# Workflows Section
	with st.sidebar.expander("🧭 Workflows", expanded=True):
		st.page_link("streamlit_app.py", label="Home", icon="🏠")
		st.page_link("pages/rollout.py", label="Rollout Inspector", icon="🛰️")
		st.page_link("pages/evaluation.py", label="Monte Carlo Evaluation", icon="🎯")
		st.page_link("pages/training.py", label="Training Monitor", icon="📈")

	if st.sidebar.button("🧹 Clear Cache", use_container_width=True, type="secondary"):
		st.toast("Session state and cached results cleared!", icon="🔴")
		clear_session_state()

	st.sidebar.markdown("---")
