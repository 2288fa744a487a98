import streamlit as st

# Custom function to set the page configuration
def set_custom_page_config(page_title="Hypersonic Guidance Lab", layout="wide", initial_sidebar_state="expanded"):

	st.set_page_config(
		page_title=page_title,
		layout=layout,
		initial_sidebar_state=initial_sidebar_state,
		page_icon="🚀",
	)

	st.title(page_title)
