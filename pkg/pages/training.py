import streamlit as st
from utils.dashboard.handlers import list_checkpoints, load_metrics
from utils.page_config import set_custom_page_config
from utils.sidebar.navigation import navigate

# Initialize session state variables
def initialize_session_state():
	if 'training_run_dir' not in st.session_state:
		st.session_state.training_run_dir = "runs/desk"

# Metrics written by `cli.py train`, re-read on every refresh so a live run can be followed
def display_metrics(run_dir):
	success, message, metrics = load_metrics(run_dir)
	if not success:
		st.warning(message)
		return
	st.caption(message)
	by_update = metrics.set_index("Update")

	tab_reward, tab_episode, tab_optimizer, tab_table = st.tabs(["Reward", "Episodes", "Optimizer", "Table"])
	with tab_reward:
		st.markdown("###### Mean, mean − SD and minimum episode reward per update")
		st.line_chart(by_update[["Mean R", "SD R", "Min R"]])
	with tab_episode:
		col1, col2 = st.columns(2)
		with col1:
			st.markdown("###### Episode length (steps)")
			st.line_chart(by_update[["Mean Steps", "Max Steps"]])
		with col2:
			st.markdown("###### Miss (m)")
			st.line_chart(by_update[["Mean Miss", "Min Miss"]])
		st.markdown("###### Terminal bonus rate")
		st.line_chart(by_update["Terminal Rate"])
	with tab_optimizer:
		col1, col2 = st.columns(2)
		with col1:
			st.markdown("###### KL divergence")
			st.line_chart(by_update["KL"])
			st.markdown("###### Clip range")
			st.line_chart(by_update["Clip"])
		with col2:
			st.markdown("###### Learning rates")
			st.line_chart(by_update[["Policy LR", "Value LR"]])
			st.markdown("###### Value loss")
			st.line_chart(by_update["Value Loss"])
	with tab_table:
		st.dataframe(metrics, use_container_width=True, hide_index=True)
		st.download_button("Download metrics CSV", data=metrics.to_csv(index=False), file_name="metrics.csv", mime="text/csv")

def display_checkpoints(run_dir):
	st.markdown("#### Checkpoints")
	success, message, table = list_checkpoints(run_dir)
	if not success:
		st.info(message)
		return
	st.dataframe(table, use_container_width=True, hide_index=True)

def main():
	set_custom_page_config(page_title="Training Monitor")
	navigate()
	initialize_session_state()
	run_dir = st.text_input("Run directory", value=st.session_state.training_run_dir, help="--out directory of a training run")
	st.session_state.training_run_dir = run_dir
	if st.button("Refresh"):
		st.rerun()
	display_metrics(run_dir)
	display_checkpoints(run_dir)

if __name__ == "__main__":
	main()
