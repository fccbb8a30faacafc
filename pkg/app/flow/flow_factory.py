from app.flow.base import BaseFlow, FlowType


class FlowFactory:
    """Factory for creating the different types of flows"""

    @staticmethod
    def create_flow(flow_type: FlowType, **kwargs) -> BaseFlow:
        """Create a flow of the specified type."""
        if flow_type == FlowType.VERIFICATION:
            from app.flow.verification import VerificationFlow

            return VerificationFlow(**kwargs)
        raise ValueError(f"Unknown flow type: {flow_type}")
