import streamlit as st
from utils.dashboard.handlers import cached_rollout, show_trace
from utils.evaluation.monte_carlo import PN_POLICY
from utils.page_config import set_custom_page_config
from utils.sidebar.navigation import navigate
from utils.sidebar.helper import selected_config_path

CHECKPOINT = "checkpoint"

# Initialize session state variables
def initialize_session_state():
	if 'rollout_policy' not in st.session_state:
		st.session_state.rollout_policy = PN_POLICY
	if 'rollout_checkpoint' not in st.session_state:
		st.session_state.rollout_checkpoint = ""
	if 'rollout_seed' not in st.session_state:
		st.session_state.rollout_seed = 0
	if 'rollout_case' not in st.session_state:
		st.session_state.rollout_case = ""

# Episode inputs: policy source, seed and an optional experiment case
def display_rollout_inputs():
	col1, col2 = st.columns(2)
	with col1:
		policy = st.radio(
			"Policy",
			options=[PN_POLICY, CHECKPOINT],
			format_func=lambda p: "Proportional navigation" if p == PN_POLICY else "Trained checkpoint",
			horizontal=True,
			index=0 if st.session_state.rollout_policy == PN_POLICY else 1,
		)
		checkpoint = st.text_input(
			"Checkpoint path",
			value=st.session_state.rollout_checkpoint,
			disabled=policy == PN_POLICY,
			help="e.g. runs/desk/checkpoints/update_00150.ckpt",
		)
	with col2:
		seed = st.number_input("Seed", min_value=0, value=st.session_state.rollout_seed, step=1)
		case = st.text_input(
			"Case (optional)",
			value=st.session_state.rollout_case,
			help="Experiment case label such as PV=20 or Divert=10%; empty runs the config as-is",
		)

	if st.button("Run Episode", type="primary"):
		st.session_state.rollout_policy = policy
		st.session_state.rollout_checkpoint = checkpoint
		st.session_state.rollout_seed = int(seed)
		st.session_state.rollout_case = case.strip()
		st.session_state.rollout_requested = True

# Run (or fetch from cache) and render the requested episode
def display_rollout():
	if not st.session_state.get("rollout_requested"):
		st.info("Choose a policy and seed, then run an episode.")
		return
	if st.session_state.rollout_policy == CHECKPOINT and not st.session_state.rollout_checkpoint:
		st.error("Enter a checkpoint path or switch to proportional navigation.")
		return
	with st.spinner("Simulating..."):
		success, message, payload = cached_rollout(
			selected_config_path(),
			st.session_state.rollout_policy,
			st.session_state.rollout_checkpoint or None,
			st.session_state.rollout_seed,
			st.session_state.rollout_case or None,
		)
	if not success:
		st.error(message)
		return
	info, trace = payload
	st.success(message)

	col1, col2, col3, col4 = st.columns(4)
	col1.metric("Miss (m)", f"{info['miss']:.2f}")
	col2.metric("Terminal speed (m/s)", f"{info['terminal_speed']:.0f}")
	col3.metric("Time of flight (s)", f"{info['time_of_flight']:.2f}")
	col4.metric("Diverts", info["n_diverts"])
	if info.get("failure"):
		st.warning(f"Episode failed: {info['failure']}")

	show_trace(trace)
	st.download_button(
		"Download trace CSV",
		data=trace.to_csv(index=False),
		file_name=f"rollout_seed{st.session_state.rollout_seed}.csv",
		mime="text/csv",
	)

def main():
	set_custom_page_config(page_title="Rollout Inspector")
	navigate()
	initialize_session_state()
	display_rollout_inputs()
	display_rollout()

if __name__ == "__main__":
	main()
