#include <systemc>
#include <tlm>
#include <tlm_utils/simple_target_socket.h>

#include "payload.h"

// Echo target: copies data_in to data_out in one blocking transaction.
struct echo_target : sc_core::sc_module {
    tlm_utils::simple_target_socket<echo_target> target_socket;

    SC_CTOR(echo_target) : target_socket("target_socket") {
        target_socket.register_b_transport(this, &echo_target::b_transport);
    }

    void b_transport(tlm::tlm_generic_payload& trans, sc_core::sc_time& delay) {
        payload* p = reinterpret_cast<payload*>(trans.get_data_ptr());
        p->data_out = p->data_in;
        trans.set_response_status(tlm::TLM_OK_RESPONSE);
    }
};
